"""Compiled versus pure-Python docking kernel on the same batch of entries.

    python benchmarks/bench_kernel.py [--n 200] [--seed 0]
"""

import argparse
import math
import time

import numpy as np

from swapsim import _dock_py
from swapsim.core import load_scenario
from swapsim.docksim import RoverBody
from swapsim.optimize import PortBuilder, PoseDistribution

try:
    from swapsim import _dock_core
except ImportError:  # extension not built
    _dock_core = None


def batch(n, seed):
    sc = load_scenario("canonical")
    port = PortBuilder(sc.port, sc.rover.length)(sc.curve)
    px, py = port.profile()
    rx, ry = RoverBody.from_spec(sc.rover).arrays()
    p = sc.dock
    poses = PoseDistribution.from_scenario(sc).sample(n, np.random.default_rng(seed))
    for x, y, yaw in poses:
        yield (px, py, port.face_halfheight, rx, ry, float(x), float(y), math.radians(yaw), p.step,
               port.hardstop_x, sc.port.lateral_tolerance, math.radians(sc.port.yaw_tolerance), p.max_steps,
               p.max_iter, p.stall_window, p.stall_distance, p.contact_margin, p.friction, p.rot_weight, False)


def timed(kernel, cases):
    t0 = time.perf_counter()
    out = [kernel.simulate(*c)[:5] for c in cases]
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    cases = list(batch(a.n, a.seed))
    steps = 0
    t_py, out_py = timed(_dock_py, cases)
    steps = sum(o[4] for o in out_py)
    print(f"{a.n} entries, {steps} push steps")
    print(f"python  {t_py:8.3f} s  {t_py / steps * 1e6:8.2f} us/step")
    if _dock_core is None:
        print("cython  not built")
        return
    t_cy, out_cy = timed(_dock_core, cases)
    same = all(tuple(p) == tuple(c) for p, c in zip(out_py, out_cy))
    print(f"cython  {t_cy:8.3f} s  {t_cy / steps * 1e6:8.2f} us/step")
    print(f"speedup {t_py / t_cy:.1f}x, results identical: {same}")


if __name__ == "__main__":
    main()
