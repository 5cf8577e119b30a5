"""Planar quasi-static docking entry.

The rover is pushed along the port axis in fixed increments.  After each
increment any overlap with the guide walls is removed by the smallest
translation-plus-yaw correction that clears every contact (``contact_resolve``).
The run ends when the rover front reaches the hardstops, unless it stalls
first or the step budget runs out.

Coordinates: +x points into the port, the mouth plane is ``x = 0`` and the
port is symmetric about ``y = 0``.  A rover pose is the position of its
front-centre point plus its yaw.

The inner loop lives in the compiled ``_dock_core`` extension.  If it is not
importable (or ``SWAPSIM_PURE_PYTHON=1``) the bit-identical pure-Python
``_dock_py`` is used instead; ``KERNEL`` names the active one.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _dock_py
from .core import DockParams, PortSpec, Pose2D, RoverSpec
from .curve import GuideCurve, Polyline2D, discretize, mirror

if os.environ.get("SWAPSIM_PURE_PYTHON", "") not in ("", "0"):
    _kernel = _dock_py
    KERNEL = "python"
else:
    try:
        from . import _dock_core as _kernel

        KERNEL = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _kernel = _dock_py
        KERNEL = "python"


class FailureReason(enum.Enum):
    WEDGED = "WEDGED"
    MISSED_PORT = "MISSED_PORT"
    EXCEEDED_STEPS = "EXCEEDED_STEPS"


class GeometryError(ValueError):
    """Port or rover description that cannot be simulated at all."""


class WedgedError(RuntimeError):
    """Contact correction could not clear the overlap (two-sided jam)."""


@dataclass(frozen=True, eq=False)
class PortGeometry:
    """Guide walls of a symmetric port.

    ``left_guide`` is the y > 0 wall running from the mouth corner through the
    Bezier guide and along the throat channel to its far end; ``right_guide``
    is its mirror image.  The hub face runs from the mouth corner out to
    ``face_halfheight``.
    """

    left_guide: Polyline2D
    right_guide: Polyline2D
    hardstop_x: float
    throat_halfwidth: float
    face_halfheight: float
    guide_depth: float

    def __post_init__(self):
        if mirror(self.left_guide) != self.right_guide:
            raise GeometryError("guides must be mirror images")
        v = self.left_guide.vertices
        if not np.all(np.diff(v[:, 0]) > 0.0):
            raise GeometryError("guide must be strictly increasing in x")
        if v[0, 0] != 0.0:
            raise GeometryError("guide must start on the mouth plane x = 0")
        if not self.hardstop_x > self.guide_depth:
            raise GeometryError("hardstop must lie beyond the guide depth")
        if not self.hardstop_x <= v[-1, 0]:
            raise GeometryError("channel must extend to the hardstop")
        if not 0.0 < self.throat_halfwidth <= v[0, 1] < self.face_halfheight:
            raise GeometryError("need 0 < throat <= mouth < face half-height")

    @property
    def mouth_halfwidth(self) -> float:
        return float(self.left_guide.vertices[0, 1])

    def profile(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.left_guide.vertices
        return np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1])


def build_port(curve: GuideCurve, spec: PortSpec = PortSpec(), rover_length: float = 0.26,
               max_chord_error: float = 5e-4) -> PortGeometry:
    """Port for ``curve`` with a straight throat channel up to the hardstops.

    The channel continues one rover length past the hardstop so a seated rover
    is still held on both sides along its whole body.
    """
    guide = discretize(curve, max_chord_error).vertices
    hardstop = curve.depth + spec.channel_length
    end = hardstop + rover_length
    wall = np.vstack([guide, [[end, curve.throat_halfwidth]]])
    left = Polyline2D(wall)
    return PortGeometry(
        left_guide=left,
        right_guide=mirror(left),
        hardstop_x=hardstop,
        throat_halfwidth=curve.throat_halfwidth,
        face_halfheight=curve.mouth_halfwidth + spec.face_height,
        guide_depth=curve.depth,
    )


@dataclass(frozen=True, eq=False)
class RoverBody:
    """Rigid rover footprint; origin at the front-centre, +x forward, CCW outline."""

    outline: Polyline2D
    halfwidth: float
    length: float
    bumpers_enabled: bool = False

    def __post_init__(self):
        if not self.outline.closed:
            raise GeometryError("rover outline must be closed")
        v = self.outline.vertices
        if len(v) < 3:
            raise GeometryError("rover outline needs at least 3 vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if not np.all(cross > 0.0):
            raise GeometryError("rover outline must be strictly convex and counter-clockwise")
        if not math.isclose(float(np.max(np.abs(v[:, 1]))), self.halfwidth, rel_tol=0, abs_tol=1e-12):
            raise GeometryError("halfwidth does not match the outline")

    @classmethod
    def box(cls, halfwidth: float, length: float) -> "RoverBody":
        h, n = halfwidth, length
        pts = [(-n, -h), (0.0, -h), (0.0, h), (-n, h)]
        return cls(Polyline2D(pts, closed=True), h, n, False)

    @classmethod
    def with_bumpers(cls, halfwidth: float, length: float, depth: float, inset: float) -> "RoverBody":
        """Box body whose front corners carry chamfered bumpers.

        Each bumper runs from the side of the body at ``depth`` behind the
        front face to the face at ``inset`` in from the side, so the nose
        meets a funnel wall on a slope instead of a square corner.
        """
        h, n = halfwidth, length
        if depth <= 0.0 or inset <= 0.0:
            return cls.box(h, n)
        if not (depth < n and inset < h):
            raise GeometryError("bumper must fit within the body outline")
        pts = [(-n, -h), (-depth, -h), (0.0, -h + inset), (0.0, h - inset), (-depth, h), (-n, h)]
        return cls(Polyline2D(pts, closed=True), h, n, True)

    @classmethod
    def from_spec(cls, spec: RoverSpec, bumpers: bool = False) -> "RoverBody":
        if bumpers:
            return cls.with_bumpers(spec.halfwidth, spec.length, spec.bumper_depth, spec.bumper_inset)
        return cls.box(spec.halfwidth, spec.length)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.outline.vertices
        return np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1])


@dataclass(frozen=True)
class DockResult:
    success: bool
    final_pose: Pose2D
    trajectory: list[Pose2D] = field(repr=False)
    failure_reason: FailureReason | None
    steps: int
    out_of_tolerance: bool = False  # reached the hardstop but not square/centred


def _check_fit(port: PortGeometry, rover: RoverBody):
    if rover.halfwidth >= port.throat_halfwidth:
        raise GeometryError(
            f"rover half-width {rover.halfwidth} does not fit the throat {port.throat_halfwidth}"
        )


def _front_outside(port: PortGeometry, rover: RoverBody, start: Pose2D) -> bool:
    rx, ry = rover.arrays()
    c, s = math.cos(start.yaw_rad), math.sin(start.yaw_rad)
    wx = start.x_axial + c * rx - s * ry
    return bool(np.all(wx < 0.0))


_STATUS = {
    _dock_py.WEDGED: FailureReason.WEDGED,
    _dock_py.MISSED_PORT: FailureReason.MISSED_PORT,
    _dock_py.EXCEEDED_STEPS: FailureReason.EXCEEDED_STEPS,
    # Arriving skewed or off-centre means the pusher cannot engage the port.
    _dock_py.OUT_OF_TOLERANCE: FailureReason.MISSED_PORT,
}


def simulate_entry(port: PortGeometry, rover: RoverBody, start: Pose2D,
                   params: DockParams = DockParams(), lateral_tol: float = 0.005,
                   yaw_tol: float = 2.0, record: bool = True) -> DockResult:
    """Push ``rover`` from ``start`` into ``port``; tolerances in m and degrees."""
    _check_fit(port, rover)
    if not (lateral_tol > 0.0 and yaw_tol > 0.0):
        raise ValueError("tolerances must be positive")
    if not _front_outside(port, rover, start):
        raise GeometryError("start pose must place the rover entirely outside the mouth (x < 0)")
    px, py = port.profile()
    rx, ry = rover.arrays()
    status, x, y, psi, steps, traj = _kernel.simulate(
        px, py, port.face_halfheight, rx, ry,
        float(start.x_axial), float(start.y_lateral), start.yaw_rad,
        params.step, port.hardstop_x, lateral_tol, math.radians(yaw_tol),
        params.max_steps, params.max_iter, params.stall_window, params.stall_distance,
        params.contact_margin, params.friction, params.rot_weight, record,
    )
    poses = [start]
    for i in range(3, len(traj), 3):
        poses.append(Pose2D(traj[i], traj[i + 1], math.degrees(traj[i + 2])))
    final = Pose2D(x, y, math.degrees(psi))
    return DockResult(
        success=status == _dock_py.OK,
        final_pose=final,
        trajectory=poses,
        failure_reason=_STATUS.get(status),
        steps=steps,
        out_of_tolerance=status == _dock_py.OUT_OF_TOLERANCE,
    )


def passes(port: PortGeometry, rover: RoverBody, start: Pose2D, params: DockParams = DockParams(),
           lateral_tol: float = 0.005, yaw_tol: float = 2.0) -> bool:
    """Pass/fail only; skips trajectory recording."""
    return simulate_entry(port, rover, start, params, lateral_tol, yaw_tol, record=False).success


def contact_resolve(rover_pose: Pose2D, rover: RoverBody, port: PortGeometry,
                    params: DockParams = DockParams()) -> Pose2D:
    """Smallest translation-plus-yaw correction that removes all overlap.

    A non-overlapping pose is returned unchanged.  Raises ``WedgedError``
    when no admissible correction exists within the iteration cap.
    """
    px, py = port.profile()
    rx, ry = rover.arrays()
    x, y, psi, ok = _kernel.resolve(
        px, py, port.face_halfheight, rx, ry,
        float(rover_pose.x_axial), float(rover_pose.y_lateral), rover_pose.yaw_rad,
        params.max_iter, 0.0, params.friction, params.rot_weight,
    )
    if not ok:
        raise WedgedError("overlap could not be removed")
    if x == rover_pose.x_axial and y == rover_pose.y_lateral and psi == rover_pose.yaw_rad:
        return rover_pose
    return Pose2D(x, y, math.degrees(psi))


def penetration(rover_pose: Pose2D, rover: RoverBody, port: PortGeometry) -> float:
    """Deepest overlap between rover and walls (0 when clear)."""
    px, py = port.profile()
    rx, ry = rover.arrays()
    cs = _kernel.find_contacts(px, py, port.face_halfheight, rx, ry, float(rover_pose.x_axial),
                               float(rover_pose.y_lateral), rover_pose.yaw_rad, 0.0)
    return max([c[0] for c in cs], default=0.0)
