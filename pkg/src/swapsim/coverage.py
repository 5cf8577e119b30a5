"""Hub-network coverage geometry.

Each hub serves a disk of radius ``R_h``: a rover drives out until half its
module is spent and drives back on the rest.  Two hubs ``d_h`` apart share a
circular lens.  Chains and hexagonal layouts with ``d_h = R_h sqrt(3)``
tile larger areas.

Closed forms are paired with sampling oracles (``union_area_mc``,
``lens_area_quad``) so every formula can be checked independently.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import FleetSpec

SQRT3 = math.sqrt(3.0)


class Topology(enum.Enum):
    CHAIN = "chain"
    HEX = "hex"
    CUSTOM = "custom"


class DisjointHubsWarning(UserWarning):
    """Hubs farther apart than 2 R_h share no area (no hub-to-hub travel)."""


# --- single hub -------------------------------------------------------------


def endurance(spec: FleetSpec) -> float:
    """Hours one module keeps the rover running: ``Q_b V_b / P_m``."""
    return spec.q_b * spec.v_b / spec.p_rover


def service_radius(spec: FleetSpec) -> float:
    """Out-and-back range in meters: half the distance driven on one module."""
    return 0.5 * spec.v_rover * endurance(spec) * 3600.0


def hub_area(r_h: float) -> float:
    return math.pi * r_h * r_h


# --- two hubs ---------------------------------------------------------------


def overlap_area(r_h: float, d_h: float) -> float:
    """Lens shared by two radius-``r_h`` disks whose centres are ``d_h`` apart."""
    if not r_h > 0.0:
        raise ValueError("r_h must be positive")
    if d_h < 0.0:
        raise ValueError("d_h must be non-negative")
    if d_h > 2.0 * r_h:
        warnings.warn(f"d_h={d_h} exceeds 2*r_h={2 * r_h}; hubs do not overlap", DisjointHubsWarning,
                      stacklevel=2)
        return 0.0
    # (2r - d)(2r + d) and atan2 stay accurate near tangency, where 4r^2 - d^2 and acos lose digits
    chord = math.sqrt((2.0 * r_h - d_h) * (2.0 * r_h + d_h))
    a = 2.0 * r_h * r_h * math.atan2(chord, d_h) - 0.5 * d_h * chord
    return min(max(a, 0.0), hub_area(r_h))


def lens_area_quad(r_h: float, d_h: float) -> float:
    """Lens area by integrating the chord length across the lens (oracle).

    With centres at ``(0, 0)`` and ``(d_h, 0)`` the lens spans
    ``x in [d_h - r_h, r_h]`` and at each ``x`` its height is twice the
    smaller of the two half-chords.
    """
    from scipy.integrate import quad

    if d_h >= 2.0 * r_h:
        return 0.0

    def height(x):
        h1 = r_h * r_h - x * x
        h2 = r_h * r_h - (x - d_h) ** 2
        return 2.0 * math.sqrt(max(min(h1, h2), 0.0))

    mid = 0.5 * d_h
    lo, hi = d_h - r_h, r_h
    a1, _ = quad(height, lo, mid, epsabs=0.0, epsrel=1e-12, limit=200)
    a2, _ = quad(height, mid, hi, epsabs=0.0, epsrel=1e-12, limit=200)
    return a1 + a2


# --- networks ---------------------------------------------------------------


def chain_coverage(n_h: int, r_h: float, d_h: float) -> float:
    """Hubs in a line at spacing ``d_h``: ``n (A_h - A_ov) + A_ov``."""
    if n_h < 1:
        raise ValueError("n_h must be >= 1")
    ov = overlap_area(r_h, d_h)
    return n_h * (hub_area(r_h) - ov) + ov


def hex_coverage(n_h: int, r_h: float) -> float:
    """Hexagonal spacing ``d_h = r_h sqrt(3)``: ``n A_h - max(0, 2n - 3) A_ov``.

    The pairwise count is the closed form's approximation; compare with
    ``union_area_mc`` on ``hex_positions`` for the exact union.
    """
    if n_h < 1:
        raise ValueError("n_h must be >= 1")
    return n_h * hub_area(r_h) - max(0, 2 * n_h - 3) * overlap_area(r_h, r_h * SQRT3)


def chain_positions(n_h: int, d_h: float) -> np.ndarray:
    return np.column_stack([np.arange(n_h) * d_h, np.zeros(n_h)])


def hex_positions(n_h: int, r_h: float) -> np.ndarray:
    """First ``n_h`` sites of a triangular lattice with spacing ``r_h sqrt(3)``.

    Sites are taken in order of distance from the centroid of the first
    lattice triangle (ties by angle), so three hubs form a Johnson-circle
    triple and every prefix stays compact.
    """
    if n_h < 1:
        raise ValueError("n_h must be >= 1")
    d = r_h * SQRT3
    cx, cy = 0.5 * d, d * SQRT3 / 6.0
    k = int(math.ceil(math.sqrt(n_h))) + 2
    sites = []
    for j in range(-k, k + 1):
        for i in range(-k, k + 1):
            x = d * (i + 0.5 * j)
            y = d * (SQRT3 / 2.0) * j
            key = (round(math.hypot(x - cx, y - cy) / d, 9), round(math.atan2(y - cy, x - cx) % (2 * math.pi), 9))
            sites.append((key, x, y))
    sites.sort(key=lambda s: s[0])
    return np.array([(x, y) for _, x, y in sites[:n_h]])


def union_area_mc(centres: np.ndarray, r_h: float, n_samples: int, rng: np.random.Generator,
                  batch: int = 1_000_000) -> tuple[float, float]:
    """Area of the union of disks by uniform sampling of the bounding box; (estimate, std error)."""
    c = np.asarray(centres, dtype=float).reshape(-1, 2)
    lo = c.min(axis=0) - r_h
    hi = c.max(axis=0) + r_h
    box = float(np.prod(hi - lo))
    r2 = r_h * r_h
    hits, left = 0, n_samples
    while left > 0:
        m = min(batch, left)
        p = lo + (hi - lo) * rng.random((m, 2))
        inside = np.zeros(m, dtype=bool)
        for q in c:
            inside |= ((p[:, 0] - q[0]) ** 2 + (p[:, 1] - q[1]) ** 2) <= r2
        hits += int(np.count_nonzero(inside))
        left -= m
    f = hits / n_samples
    return box * f, box * math.sqrt(f * (1.0 - f) / n_samples)


@dataclass(frozen=True, eq=False)
class HubNetwork:
    hubs: np.ndarray = field(repr=False)
    r_h: float
    topology: Topology = Topology.CUSTOM
    d_h: float | None = None

    def __post_init__(self):
        h = np.array(self.hubs, dtype=float).reshape(-1, 2)
        if len(h) < 1 or not np.all(np.isfinite(h)):
            raise ValueError("need at least one finite hub position")
        h.setflags(write=False)
        object.__setattr__(self, "hubs", h)
        if not self.r_h > 0.0:
            raise ValueError("r_h must be positive")
        if self.topology in (Topology.CHAIN, Topology.HEX):
            if self.d_h is None or not 0.0 < self.d_h <= 2.0 * self.r_h:
                raise ValueError("regular topologies need 0 < d_h <= 2 r_h")

    @classmethod
    def chain(cls, n_h: int, r_h: float, d_h: float) -> "HubNetwork":
        return cls(chain_positions(n_h, d_h), r_h, Topology.CHAIN, d_h)

    @classmethod
    def hex(cls, n_h: int, r_h: float) -> "HubNetwork":
        return cls(hex_positions(n_h, r_h), r_h, Topology.HEX, r_h * SQRT3)


# --- gaps -------------------------------------------------------------------


@dataclass(frozen=True)
class GapResult:
    gapless: bool
    first_gap: tuple[float, float] | None
    n_checked: int

    def __bool__(self):
        return self.gapless


def _in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule; boundary points may land on either side."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        crosses = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = ax + (y - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (x < xs)
    return inside


def default_region(network: HubNetwork) -> np.ndarray:
    """Region the layout is meant to cover.

    One hub: its own disk (as a fine polygon).  Otherwise: the convex hull
    of the hub centres, which is where a regular layout promises no gaps.
    Collinear hubs use the segment between the end hubs, thickened by a hair.
    """
    h = network.hubs
    if len(h) == 1:
        t = np.linspace(0.0, 2.0 * math.pi, 720, endpoint=False)
        return h[0] + network.r_h * (1.0 - 1e-9) * np.column_stack([np.cos(t), np.sin(t)])
    hull = _convex_hull_2d(h)
    if len(hull) < 3:
        a, b = hull[0], hull[-1]
        u = (b - a) / np.linalg.norm(b - a)
        nrm = np.array([-u[1], u[0]]) * 1e-9 * network.r_h
        return np.array([a - nrm, b - nrm, b + nrm, a + nrm])
    return hull


def _convex_hull_2d(p: np.ndarray) -> np.ndarray:
    pts = sorted(map(tuple, np.unique(p, axis=0)))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for q in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    for q in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    ring = lower[:-1] + upper[:-1]
    return np.array(ring if len(ring) >= 3 else [pts[0], pts[-1]])


def gapless_check(network: HubNetwork, grid_step: float, region: np.ndarray | None = None) -> GapResult:
    """Sample ``region`` (default: ``default_region``) on a square grid.

    Gapless iff every sample inside the region lies within ``r_h`` of some
    hub.  The first uncovered sample in row-major order is reported.
    """
    if not grid_step > 0.0:
        raise ValueError("grid_step must be positive")
    poly = default_region(network) if region is None else np.asarray(region, dtype=float)
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    xs = np.arange(lo[0], hi[0] + 0.5 * grid_step, grid_step)
    ys = np.arange(lo[1], hi[1] + 0.5 * grid_step, grid_step)
    r2 = network.r_h * network.r_h
    checked = 0
    for y in ys:
        row = np.column_stack([xs, np.full_like(xs, y)])
        row = row[_in_polygon(row, poly)]
        if len(row) == 0:
            continue
        checked += len(row)
        d2 = np.min(((row[:, None, :] - network.hubs[None, :, :]) ** 2).sum(axis=2), axis=1)
        bad = np.nonzero(d2 > r2)[0]
        if len(bad):
            q = row[bad[0]]
            return GapResult(False, (float(q[0]), float(q[1])), checked)
    return GapResult(True, None, checked)


# --- trajectories -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    waypoints: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=float).reshape(-1, 2)
        if len(w) < 2:
            raise ValueError("a trajectory needs at least 2 waypoints")
        if not np.all(np.isfinite(w)):
            raise ValueError("waypoints must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "waypoints", w)

    @property
    def length(self) -> float:
        d = np.diff(self.waypoints, axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())


class TrajectoryIssue(enum.Enum):
    START = "START"  # does not start at a hub
    END = "END"  # does not end at a hub
    LENGTH = "LENGTH"  # longer than 2 R_h


@dataclass(frozen=True)
class TrajectoryCheck:
    ok: bool
    reasons: tuple[TrajectoryIssue, ...]

    def __bool__(self):
        return self.ok


def validate_trajectory(traj: Trajectory, network: HubNetwork, snap_tol: float = 1.0) -> TrajectoryCheck:
    """Must start and end within ``snap_tol`` of a hub (any hub) and be at most ``2 R_h`` long."""
    reasons = []

    def near_hub(p):
        return bool(np.min(np.hypot(*(network.hubs - p).T)) <= snap_tol)

    if not near_hub(traj.waypoints[0]):
        reasons.append(TrajectoryIssue.START)
    if not near_hub(traj.waypoints[-1]):
        reasons.append(TrajectoryIssue.END)
    if traj.length > 2.0 * network.r_h:
        reasons.append(TrajectoryIssue.LENGTH)
    return TrajectoryCheck(not reasons, tuple(reasons))


# --- report -----------------------------------------------------------------


@dataclass(frozen=True)
class CoverageRow:
    n_h: int
    closed_form: float  # m^2
    sampled: float | None  # m^2, exact union by sampling
    sampled_se: float | None


def coverage_table(topology: Topology, n_max: int, r_h: float, d_h: float | None,
                   rng: np.random.Generator | None = None, n_samples: int = 0) -> list[CoverageRow]:
    rows = []
    for n in range(1, n_max + 1):
        if topology is Topology.HEX:
            cf, pos = hex_coverage(n, r_h), hex_positions(n, r_h)
        else:
            cf, pos = chain_coverage(n, r_h, d_h), chain_positions(n, d_h)
        if rng is not None and n_samples > 0:
            s, se = union_area_mc(pos, r_h, n_samples, rng)
        else:
            s = se = None
        rows.append(CoverageRow(n, cf, s, se))
    return rows
