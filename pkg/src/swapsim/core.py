"""Shared domain types, scenario files and the seeded random-stream contract.

Units are SI throughout (meters, seconds, watts, kelvin).  Two documented
exceptions: ``Pose2D.yaw`` and guide-curve angles are in degrees, and
scenario files may give temperatures in Celsius with an explicit tag
(``"40 degC"``); they are converted to kelvin on load.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .curve import GuideCurve

SCHEMA_VERSION = 1
KELVIN_OFFSET = 273.15


class ScenarioError(ValueError):
    """Scenario file could not be read or parsed."""


class ValidationError(ScenarioError):
    """A field violates its invariant; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def normalize_yaw(deg: float) -> float:
    """Wrap an angle in degrees to (-180, 180]."""
    w = math.fmod(deg, 360.0)
    if w <= -180.0:
        w += 360.0
    elif w > 180.0:
        w -= 360.0
    return w


def deg2rad(deg: float) -> float:
    return math.radians(deg)


def rad2deg(rad: float) -> float:
    return math.degrees(rad)


def c2k(celsius: float) -> float:
    return celsius + KELVIN_OFFSET


def k2c(kelvin: float) -> float:
    return kelvin - KELVIN_OFFSET


@dataclass(frozen=True)
class Pose2D:
    """Planar rover pose: axial and lateral offsets in meters, yaw in degrees."""

    x_axial: float
    y_lateral: float
    yaw: float

    def __post_init__(self):
        for name in ("x_axial", "y_lateral", "yaw"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Pose2D.{name} must be finite")
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))

    @property
    def yaw_rad(self) -> float:
        return math.radians(self.yaw)

    def mirrored(self) -> "Pose2D":
        return Pose2D(self.x_axial, -self.y_lateral, -self.yaw)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x_axial, self.y_lateral, self.yaw)


def _require(cond: bool, name: str, msg: str):
    if not cond:
        raise ValidationError(name, msg)


@dataclass(frozen=True)
class FleetSpec:
    p_gen: float  # W
    p_hub: float  # W
    q_b: float  # Ah
    v_b: float  # V
    charge_time: float  # h
    p_rover: float  # W
    v_rover: float  # m/s
    v_hub: float = 2.5  # m/s
    n_terminals: int = 3
    swap_time: float = 98.0  # s

    def __post_init__(self):
        for name in ("p_gen", "q_b", "v_b", "charge_time", "p_rover", "v_rover"):
            v = getattr(self, name)
            _require(math.isfinite(v) and v > 0.0, name, f"must be > 0, got {v}")
        _require(self.p_hub >= 0.0, "p_hub", "must be >= 0")
        _require(self.p_hub < self.p_gen, "p_hub", "must be below p_gen")
        _require(self.v_hub >= 0.0, "v_hub", "must be >= 0")
        _require(self.n_terminals >= 1, "n_terminals", "must be >= 1")
        _require(self.swap_time >= 0.0, "swap_time", "must be >= 0")

    @property
    def module_energy_wh(self) -> float:
        return self.q_b * self.v_b

    @property
    def module_charge_power(self) -> float:
        """Power needed to refill one module in ``charge_time`` (W)."""
        return self.q_b * self.v_b / self.charge_time


@dataclass(frozen=True)
class ThermalBody:
    mass: float  # kg
    specific_heat: float  # J/(kg K)
    area: float  # m^2
    emissivity: float
    t_initial: float  # K
    t_ambient: float  # K
    t_limit: float  # K

    def __post_init__(self):
        for name in ("mass", "specific_heat", "area"):
            _require(getattr(self, name) > 0.0, name, "must be > 0")
        _require(0.0 < self.emissivity <= 1.0, "emissivity", "must lie in (0, 1]")
        _require(self.t_ambient >= 0.0, "t_ambient", "must be >= 0 K")
        _require(self.t_limit <= self.t_initial, "t_limit", "must not exceed t_initial")
        _require(self.t_ambient < self.t_limit, "t_ambient", "must be below t_limit")


@dataclass(frozen=True)
class PortSpec:
    """Everything about the port besides the guide curve."""

    channel_length: float = 0.15  # throat to hardstop, m
    face_height: float = 0.5  # hub face beyond the mouth corner, m
    lateral_tolerance: float = 0.005  # m
    yaw_tolerance: float = 2.0  # deg

    def __post_init__(self):
        _require(self.channel_length > 0.0, "port.channel_length", "must be > 0")
        _require(self.face_height > 0.0, "port.face_height", "must be > 0")
        _require(self.lateral_tolerance > 0.0, "port.lateral_tolerance", "must be > 0")
        _require(self.yaw_tolerance > 0.0, "port.yaw_tolerance", "must be > 0")


@dataclass(frozen=True)
class RoverSpec:
    halfwidth: float = 0.11
    length: float = 0.26
    bumper_depth: float = 0.03  # how far the chamfer runs back along the side, m
    bumper_inset: float = 0.05  # how far the chamfer cuts into the front face, m

    def __post_init__(self):
        _require(self.halfwidth > 0.0, "rover.halfwidth", "must be > 0")
        _require(self.length > 0.0, "rover.length", "must be > 0")
        _require(self.bumper_depth >= 0.0, "rover.bumper_depth", "must be >= 0")
        _require(0.0 <= self.bumper_inset < self.halfwidth, "rover.bumper_inset", "must lie in [0, halfwidth)")


@dataclass(frozen=True)
class DockParams:
    """Numerical knobs of the quasi-static docking model."""

    step: float = 1e-3  # m per push increment
    start_x: float = -0.15  # nominal start of the rover front, m
    friction: float = 0.3  # wall friction coefficient
    rot_weight: float = 0.1  # m per rad, cost of yaw in the contact correction
    contact_margin: float = 2e-3  # m
    max_steps: int = 100_000
    max_iter: int = 50
    stall_window: int = 300  # steps
    stall_distance: float = 1e-3  # m

    def __post_init__(self):
        _require(self.step > 0.0, "dock.step", "must be > 0")
        _require(self.friction >= 0.0, "dock.friction", "must be >= 0")
        _require(self.rot_weight > 0.0, "dock.rot_weight", "must be > 0")
        _require(self.contact_margin > self.step, "dock.contact_margin", "must exceed dock.step")
        _require(self.max_steps > 0 and self.max_iter > 0, "dock.max_steps", "caps must be positive")
        _require(self.stall_window > 0, "dock.stall_window", "must be > 0")


@dataclass(frozen=True)
class MonteCarloSpec:
    n: int = 1000
    mean: tuple[float, float, float] = (0.0, 0.0, 0.0)  # axial m, lateral m, yaw deg
    sd: tuple[float, float, float] = (0.01, 0.02, 8.0)

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "sd", tuple(float(v) for v in self.sd))
        _require(self.n >= 4, "montecarlo.n", "must be >= 4")
        _require(len(self.mean) == 3 and len(self.sd) == 3, "montecarlo.sd", "need three components")
        _require(all(s > 0.0 for s in self.sd), "montecarlo.sd", "must be > 0")


@dataclass(frozen=True)
class OptimizeSpec:
    theta_step: float = 9.0  # deg
    weight_step: float = 0.1
    yaw_scale: float = 90.0  # deg
    axial_scale: float | None = None  # m, defaults to the mouth half-width
    yaw_tol: float = 0.05  # deg
    lateral_tol: float = 5e-4  # m
    max_bisections: int = 40

    def __post_init__(self):
        _require(0.0 < self.theta_step <= 90.0, "optimize.theta_step", "must lie in (0, 90]")
        _require(0.0 < self.weight_step <= 1.0, "optimize.weight_step", "must lie in (0, 1]")
        _require(self.yaw_scale > 0.0, "optimize.yaw_scale", "must be > 0")
        _require(self.axial_scale is None or self.axial_scale > 0.0, "optimize.axial_scale", "must be > 0")
        _require(self.yaw_tol > 0.0 and self.lateral_tol > 0.0, "optimize.yaw_tol", "tolerances must be > 0")


DEFAULT_DURATIONS = {
    "ENTRY": 20.0,
    "LIFT": 15.0,
    "CONTINUITY_CHECK": 3.0,
    "INDEX_EMPTY": 10.0,
    "SHIFT_OUT": 15.0,
    "INDEX_FULL": 10.0,
    "SHIFT_IN": 15.0,
    "LOWER": 5.0,
    "EXIT": 5.0,
}


@dataclass(frozen=True)
class FleetOps:
    """Discrete-event parameters beyond the fleet sizing inputs."""

    durations: dict = field(default_factory=lambda: dict(DEFAULT_DURATIONS))
    work_distance: float = 25.0  # m, hub to work site
    reserve: float = 0.1  # fraction of Q_b held back on return
    n_ports: int = 1

    def __post_init__(self):
        d = {str(k): float(v) for k, v in self.durations.items()}
        missing = set(DEFAULT_DURATIONS) - set(d)
        _require(not missing, "fleet_ops.durations", f"missing states {sorted(missing)}")
        _require(all(v >= 0.0 for v in d.values()), "fleet_ops.durations", "must be >= 0")
        object.__setattr__(self, "durations", d)
        _require(self.work_distance >= 0.0, "fleet_ops.work_distance", "must be >= 0")
        _require(0.0 <= self.reserve < 1.0, "fleet_ops.reserve", "must lie in [0, 1)")
        _require(self.n_ports >= 1, "fleet_ops.n_ports", "must be >= 1")


@dataclass(frozen=True)
class Scenario:
    fleet: FleetSpec
    curve: GuideCurve
    thermal_rover: ThermalBody
    thermal_battery: ThermalBody
    seed: int = 0
    sim_duration: float = 86400.0
    port: PortSpec = field(default_factory=PortSpec)
    rover: RoverSpec = field(default_factory=RoverSpec)
    dock: DockParams = field(default_factory=DockParams)
    montecarlo: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    optimize: OptimizeSpec = field(default_factory=OptimizeSpec)
    fleet_ops: FleetOps = field(default_factory=FleetOps)

    def __post_init__(self):
        _require(
            isinstance(self.seed, int) and 0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer"
        )
        _require(self.sim_duration > 0.0, "sim_duration", "must be > 0")
        _require(
            self.rover.halfwidth < self.curve.throat_halfwidth,
            "rover.halfwidth",
            "rover must be narrower than the throat",
        )

    def with_seed(self, seed: int) -> "Scenario":
        return dataclasses.replace(self, seed=seed)


# --- random streams -------------------------------------------------------


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream; identical draws for an identical seed on every platform."""
    if not (0 <= int(seed) < 2**64):
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Independent sub-stream for ``label``; unaffected by which other streams were drawn."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_label_key(label),))
    return np.random.Generator(np.random.PCG64(ss))


# --- scenario files ---------------------------------------------------------

_TEMP_FIELDS = ("t_initial", "t_ambient", "t_limit")


def parse_temperature(value: Any, name: str) -> float:
    """Kelvin from a bare number (kelvin) or a tagged string like ``"40 degC"``."""
    if isinstance(value, bool):
        raise ValidationError(name, "temperature must be a number or tagged string")
    kelvin = _kelvin(value)
    if kelvin is None:
        raise ValidationError(name, f"cannot read temperature {value!r}; use kelvin or e.g. '40 degC'")
    if not kelvin >= 0.0:
        raise ValidationError(name, f"{value!r} is below absolute zero")
    return kelvin


def _kelvin(value: Any) -> float | None:
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        parts = value.split()
        if len(parts) == 2:
            try:
                num = float(parts[0])
            except ValueError:
                num = None
            unit = parts[1].lower()
            if num is not None and unit in ("k", "kelvin"):
                return num
            if num is not None and unit in ("degc", "c", "celsius"):
                return c2k(num)
    return None


def _build(cls, data: Any, prefix: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(prefix, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"{prefix}.{sorted(unknown)[0]}", "unknown field")
    kwargs = dict(data)
    if cls is ThermalBody:
        for t in _TEMP_FIELDS:
            if t in kwargs:
                kwargs[t] = parse_temperature(kwargs[t], f"{prefix}.{t}")
    for k in ("mean", "sd"):
        if cls is MonteCarloSpec and k in kwargs:
            kwargs[k] = tuple(kwargs[k])
    try:
        return cls(**kwargs)
    except ValidationError as e:
        if e.field.startswith(prefix):
            raise
        raise ValidationError(f"{prefix}.{e.field}", str(e).split(": ", 1)[-1]) from None
    except TypeError as e:
        raise ValidationError(prefix, str(e)) from None
    except ValueError as e:
        raise ValidationError(prefix, str(e)) from None


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario root must be a mapping")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    for key in ("fleet", "curve", "thermal_rover", "thermal_battery"):
        if key not in data:
            raise ValidationError(key, "missing section")
    known = {f.name for f in dataclasses.fields(Scenario)} | {"schema_version"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown section")
    sections = {
        "fleet": FleetSpec,
        "curve": GuideCurve,
        "thermal_rover": ThermalBody,
        "thermal_battery": ThermalBody,
        "port": PortSpec,
        "rover": RoverSpec,
        "dock": DockParams,
        "montecarlo": MonteCarloSpec,
        "optimize": OptimizeSpec,
        "fleet_ops": FleetOps,
    }
    kwargs = {}
    for key, cls in sections.items():
        if key in data:
            kwargs[key] = _build(cls, data[key], key)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ValidationError("seed", "must be an integer")
    kwargs["seed"] = seed
    if "sim_duration" in data:
        kwargs["sim_duration"] = float(data["sim_duration"])
    return Scenario(**kwargs)


def scenario_to_dict(sc: Scenario) -> dict:
    def plain(obj):
        d = dataclasses.asdict(obj)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    out = {"schema_version": SCHEMA_VERSION, "seed": sc.seed, "sim_duration": sc.sim_duration}
    for key in ("fleet", "curve", "thermal_rover", "thermal_battery", "port", "rover", "dock",
                "montecarlo", "optimize", "fleet_ops"):
        out[key] = plain(getattr(sc, key))
    return out


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=True, allow_unicode=True)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dump_scenario(sc), encoding="utf-8")


def canonical_path() -> Path:
    return Path(str(resources.files("swapsim").joinpath("data/canonical.yaml")))


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file; ``"canonical"`` selects the bundled one."""
    p = canonical_path() if str(path) == "canonical" else Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"{p}: {e.strerror or e}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioError(f"{p}: malformed scenario file: {e}") from None
    return scenario_from_dict(data)


def canonical_scenario() -> Scenario:
    return load_scenario("canonical")
