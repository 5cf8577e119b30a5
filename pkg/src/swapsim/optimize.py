"""Guide-curve design loop.

* ``max_compensation``: bisection for the largest yaw (or lateral offset) a
  port can still funnel into tolerance, with a post-hoc monotonicity check.
* ``grid_search``: score every (theta, weight) cell and rank them.
* ``monte_carlo_region`` / ``compare_iterations``: success-region hulls
  for whole design iterations, compared on identical pose samples.

Lateral compensation is searched along the lateral offset (the axis the
funnel actually limits); the axial start offset only enters the Monte-Carlo
regions.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DockParams, PortSpec, Pose2D, Scenario
from .curve import DegenerateGeometryError, GuideCurve
from .docksim import PortGeometry, RoverBody, build_port, passes
from .hull import Hull3, PointCloud3, quickhull3


class Axis(enum.Enum):
    YAW = "yaw"
    LATERAL = "lateral"


class NonMonotoneWarning(UserWarning):
    """Pass/fail along a search axis was not monotone; an exhaustive sweep was used."""


class EmptyCaptureWarning(UserWarning):
    """The aligned start already fails, so the capture range is empty."""


class RegionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class DockSetup:
    """Everything besides the port and rover needed to run a pass/fail test."""

    params: DockParams = DockParams()
    lateral_tol: float = 0.005
    yaw_tol: float = 2.0

    @classmethod
    def from_scenario(cls, sc: Scenario) -> "DockSetup":
        return cls(sc.dock, sc.port.lateral_tolerance, sc.port.yaw_tolerance)

    def passes(self, port: PortGeometry, rover: RoverBody, pose: Pose2D) -> bool:
        return passes(port, rover, pose, self.params, self.lateral_tol, self.yaw_tol)


@dataclass(frozen=True)
class PortBuilder:
    """Picklable ``GuideCurve -> PortGeometry`` map."""

    spec: PortSpec = PortSpec()
    rover_length: float = 0.26

    def __call__(self, curve: GuideCurve) -> PortGeometry:
        return build_port(curve, self.spec, self.rover_length)


# --- compensation ---------------------------------------------------------


def _start(setup: DockSetup, axis: Axis, m: float) -> Pose2D:
    if axis is Axis.YAW:
        return Pose2D(setup.params.start_x, 0.0, m)
    return Pose2D(setup.params.start_x, m, 0.0)


def _upper(axis: Axis, port: PortGeometry) -> float:
    # past 90 deg the rover faces away; past the mouth corner the nose lands on the hub face
    return 90.0 if axis is Axis.YAW else port.mouth_halfwidth


def sweep_boundary(port: PortGeometry, rover: RoverBody, axis: Axis, step: float,
                   setup: DockSetup = DockSetup()) -> float:
    """End of the contiguous passing run from zero on a grid of spacing ``step``."""
    hi = _upper(axis, port)
    n = int(math.floor(hi / step + 1e-9))
    best = 0.0
    for k in range(n + 1):
        m = k * step
        if not setup.passes(port, rover, _start(setup, axis, m)):
            break
        best = m
    return best


def max_compensation(port_builder, curve: GuideCurve, rover: RoverBody, axis: Axis, tol: float,
                     setup: DockSetup = DockSetup(), max_bisections: int = 40) -> float:
    """Largest perturbation along ``axis`` (deg or m) that still docks, to within ``tol``.

    Bisection assumes pass/fail is monotone along the axis.  The answer is
    checked afterwards at ``value - tol`` and ``value + tol``; if that check
    fails a ``NonMonotoneWarning`` is issued and the value comes from an
    exhaustive sweep at ``tol`` spacing instead.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    port = port_builder(curve)
    ok = lambda m: setup.passes(port, rover, _start(setup, axis, m))  # noqa: E731
    if not ok(0.0):
        warnings.warn(f"aligned start fails for {curve}", EmptyCaptureWarning, stacklevel=2)
        return 0.0
    hi = _upper(axis, port)
    if ok(hi):
        return hi
    lo = 0.0
    for _ in range(max_bisections):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    below = max(lo - tol, 0.0)
    if ok(below) and not ok(lo + tol):
        return lo
    warnings.warn(
        f"{axis.value} pass/fail not monotone near {lo:g} for theta={curve.theta}, w={curve.weight}; "
        "using exhaustive sweep",
        NonMonotoneWarning,
        stacklevel=2,
    )
    return sweep_boundary(port, rover, axis, tol, setup)


# --- grid search ----------------------------------------------------------


@dataclass(frozen=True)
class CompensationResult:
    max_yaw: float  # deg
    max_lateral: float  # m
    score: float
    diagnostic: str = ""


def compensation_score(max_yaw: float, max_lateral: float, yaw_scale: float, axial_scale: float) -> float:
    return math.hypot(max_yaw / yaw_scale, max_lateral / axial_scale)


def _grid(step: float, top: float) -> tuple[float, ...]:
    n = int(round(top / step))
    vals = [round(k * step, 10) for k in range(n + 1)]
    if vals[-1] < top:
        vals.append(top)
    return tuple(float(v) for v in vals)


@dataclass(frozen=True)
class GridSearchConfig:
    theta_values: tuple[float, ...]
    weight_values: tuple[float, ...]
    yaw_scale: float = 90.0
    axial_scale: float | None = None  # m; None means the mouth half-width
    template: GuideCurve = GuideCurve(0.0, 1.0)  # port dimensions for every cell
    yaw_tol: float = 0.05
    lateral_tol: float = 5e-4
    max_bisections: int = 40

    def __post_init__(self):
        th = tuple(float(v) for v in self.theta_values)
        ws = tuple(float(v) for v in self.weight_values)
        object.__setattr__(self, "theta_values", th)
        object.__setattr__(self, "weight_values", ws)
        if not th or not ws:
            raise ValueError("grid axes must be nonempty")
        if list(th) != sorted(set(th)) or list(ws) != sorted(set(ws)):
            raise ValueError("grid axes must be sorted without repeats")
        if th[0] < 0.0 or th[-1] > 90.0 or ws[0] < 0.0 or ws[-1] > 1.0:
            raise ValueError("theta must lie in [0, 90] and weight in [0, 1]")
        if not self.yaw_scale > 0.0 or (self.axial_scale is not None and not self.axial_scale > 0.0):
            raise ValueError("score scales must be positive")

    @classmethod
    def from_steps(cls, theta_step: float = 9.0, weight_step: float = 0.1, **kw) -> "GridSearchConfig":
        return cls(_grid(theta_step, 90.0), _grid(weight_step, 1.0), **kw)

    @classmethod
    def from_scenario(cls, sc: Scenario, theta_step: float | None = None,
                      weight_step: float | None = None) -> "GridSearchConfig":
        o = sc.optimize
        return cls.from_steps(
            theta_step or o.theta_step, weight_step or o.weight_step,
            yaw_scale=o.yaw_scale, axial_scale=o.axial_scale, template=sc.curve,
            yaw_tol=o.yaw_tol, lateral_tol=o.lateral_tol, max_bisections=o.max_bisections,
        )

    @property
    def scale(self) -> float:
        return self.axial_scale if self.axial_scale is not None else self.template.mouth_halfwidth

    def curves(self) -> list[GuideCurve]:
        return [replace(self.template, theta=t, weight=w) for t in self.theta_values for w in self.weight_values]


def evaluate_curve(curve: GuideCurve, rover: RoverBody, config: GridSearchConfig,
                   builder: PortBuilder, setup: DockSetup = DockSetup()) -> CompensationResult:
    try:
        builder(curve)
    except DegenerateGeometryError as e:
        return CompensationResult(0.0, 0.0, 0.0, f"degenerate: {e}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        yaw = max_compensation(builder, curve, rover, Axis.YAW, config.yaw_tol, setup, config.max_bisections)
        lat = max_compensation(builder, curve, rover, Axis.LATERAL, config.lateral_tol, setup,
                               config.max_bisections)
    note = "; ".join(sorted({str(w.message) for w in caught}))
    return CompensationResult(yaw, lat, compensation_score(yaw, lat, config.yaw_scale, config.scale), note)


def _eval_chunk(args):
    curves, rover, config, builder, setup = args
    return [evaluate_curve(c, rover, config, builder, setup) for c in curves]


def _chunks(items: list, jobs: int) -> list[list]:
    k = max(1, math.ceil(len(items) / jobs))
    return [items[i:i + k] for i in range(0, len(items), k)]


def grid_search(config: GridSearchConfig, rover: RoverBody, builder: PortBuilder = PortBuilder(),
                setup: DockSetup = DockSetup(), jobs: int = 1) -> list[tuple[GuideCurve, CompensationResult]]:
    """Score every cell; best first, ties broken by (theta, weight) ascending."""
    curves = config.curves()
    if jobs <= 1:
        results = _eval_chunk((curves, rover, config, builder, setup))
    else:
        parts = _chunks(curves, jobs)
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = [r for part in ex.map(_eval_chunk, [(p, rover, config, builder, setup) for p in parts])
                       for r in part]
    ranked = sorted(zip(curves, results), key=lambda cr: (-cr[1].score, cr[0].theta, cr[0].weight))
    return ranked


# --- success regions ------------------------------------------------------


@dataclass(frozen=True)
class PoseDistribution:
    """Independent Gaussians on (axial m, lateral m, yaw deg)."""

    mean: Pose2D
    sd: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "sd", tuple(float(s) for s in self.sd))
        if len(self.sd) != 3 or not all(s > 0.0 for s in self.sd):
            raise ValueError("sd needs three positive components")

    @classmethod
    def from_scenario(cls, sc: Scenario) -> "PoseDistribution":
        m = sc.montecarlo.mean
        return cls(Pose2D(sc.dock.start_x + m[0], m[1], m[2]), sc.montecarlo.sd)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, 3))
        return np.array(self.mean.as_tuple()) + z * np.array(self.sd)


@dataclass(frozen=True, eq=False)
class SuccessRegion:
    samples: list[tuple[Pose2D, bool]] = field(repr=False)
    pass_cloud: PointCloud3 = field(repr=False)
    hull: Hull3 | None  # None when fewer than 4 poses passed
    distribution: PoseDistribution

    @property
    def volume(self) -> float:
        return 0.0 if self.hull is None else self.hull.volume

    @property
    def n_pass(self) -> int:
        return len(self.pass_cloud)

    @property
    def pass_rate(self) -> float:
        return self.n_pass / len(self.samples)

    def sample_array(self) -> np.ndarray:
        return np.array([p.as_tuple() for p, _ in self.samples])


def _pass_chunk(args):
    port, rover, setup, rows = args
    return [setup.passes(port, rover, Pose2D(*r)) for r in rows]


def region_from_samples(port: PortGeometry, rover: RoverBody, poses: np.ndarray, dist: PoseDistribution,
                        setup: DockSetup = DockSetup(), jobs: int = 1) -> SuccessRegion:
    rows = [tuple(map(float, r)) for r in poses]
    if jobs <= 1:
        ok = _pass_chunk((port, rover, setup, rows))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            ok = [b for part in ex.map(_pass_chunk, [(port, rover, setup, c) for c in _chunks(rows, jobs)])
                  for b in part]
    samples = [(Pose2D(*r), bool(b)) for r, b in zip(rows, ok)]
    pts = np.array([p.as_tuple() for p, b in samples if b]).reshape(-1, 3)
    cloud = PointCloud3(pts)
    hull = quickhull3(cloud) if len(pts) >= 4 else None
    return SuccessRegion(samples, cloud, hull, dist)


def monte_carlo_region(port: PortGeometry, rover: RoverBody, dist: PoseDistribution, n: int,
                       rng: np.random.Generator, setup: DockSetup = DockSetup(), jobs: int = 1) -> SuccessRegion:
    """Dock ``n`` Gaussian start poses and wrap the passing ones in a hull."""
    if n < 4:
        raise ValueError("n must be at least 4")
    return region_from_samples(port, rover, dist.sample(n, rng), dist, setup, jobs)


@dataclass(frozen=True)
class IterationRow:
    label: str
    volume: float
    n_pass: int
    ratio: float | None  # volume / first volume; None when the first is empty
    percent_change: float | None


@dataclass(frozen=True)
class IterationReport:
    rows: list[IterationRow]
    inversions: list[str]  # labels whose volume dropped below the previous row

    def format(self) -> str:
        out = [f"{'iteration':<22}{'volume':>14}{'passes':>8}{'ratio':>10}{'change':>10}"]
        for r in self.rows:
            ratio = "undefined" if r.ratio is None else f"{r.ratio:.3f}"
            pct = "undefined" if r.percent_change is None else f"{r.percent_change:+.1f}%"
            out.append(f"{r.label:<22}{r.volume:>14.6g}{r.n_pass:>8d}{ratio:>10}{pct:>10}")
        if self.inversions:
            out.append("volume inversions: " + ", ".join(self.inversions))
        return "\n".join(out)


def compare_iterations(regions: list[SuccessRegion], labels: list[str] | None = None) -> IterationReport:
    """Volumes relative to the first region; all regions must share their pose samples."""
    if len(regions) < 2:
        raise ValueError("need at least two regions")
    labels = labels or [f"iteration {i}" for i in range(len(regions))]
    ref = regions[0]
    ref_poses = ref.sample_array()
    for r in regions[1:]:
        if r.distribution != ref.distribution or not np.array_equal(r.sample_array(), ref_poses):
            raise RegionMismatchError("regions were not built from the same samples")
    v0 = ref.volume
    rows, inversions = [], []
    prev = None
    for lab, r in zip(labels, regions):
        ratio = r.volume / v0 if v0 > 0.0 else None
        pct = (ratio - 1.0) * 100.0 if ratio is not None else None
        rows.append(IterationRow(lab, r.volume, r.n_pass, ratio, pct))
        if prev is not None and r.volume < prev:
            inversions.append(lab)
        prev = r.volume
    return IterationReport(rows, inversions)


# --- the three design iterations ------------------------------------------


BASELINE_THETA = 90.0
BASELINE_WEIGHT = 1.0


def design_iterations(sc: Scenario, curve: GuideCurve | None = None) -> list[tuple[str, PortGeometry, RoverBody]]:
    """Baseline step port, optimized curve, optimized curve plus rover bumpers."""
    curve = curve or sc.curve
    builder = PortBuilder(sc.port, sc.rover.length)
    base = builder(replace(curve, theta=BASELINE_THETA, weight=BASELINE_WEIGHT))
    opt = builder(curve)
    return [
        ("baseline", base, RoverBody.from_spec(sc.rover)),
        ("optimized", opt, RoverBody.from_spec(sc.rover)),
        ("optimized+bumpers", opt, RoverBody.from_spec(sc.rover, bumpers=True)),
    ]
