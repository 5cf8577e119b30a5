"""Quadratic Bezier entry-guide curves.

A guide runs from the mouth corner ``P0 = (0, mouth_halfwidth)`` to the throat
entry ``P2 = (depth, throat_halfwidth)``.  The middle control point sits on the
tangent line through ``P2`` that makes ``theta`` degrees with the approach
axis; ``weight`` slides it from ``P2`` (w=0) out to where that line leaves the
guide box ``[0, depth] x [throat, mouth]`` (w=1).

The ``"mouth"`` construction is kept as an alternative: ``P1`` is interpolated
along the mouth line between ``P0`` and the tangent/mouth-line intersection.
It only honours the throat tangency at ``w = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_CHORD_ERROR = 5e-4

P1_MODES = ("tangent", "mouth")


class DegenerateGeometryError(ValueError):
    """Raised when (theta, weight) yield no usable control polygon."""


@dataclass(frozen=True)
class Polyline2D:
    """Ordered, immutable list of planar vertices in meters."""

    vertices: np.ndarray = field(repr=False)
    closed: bool = False

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 2:
            raise ValueError("polyline needs at least 2 vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("polyline vertices must be finite")
        d = np.diff(v if not self.closed else np.vstack([v, v[:1]]), axis=0)
        if np.any(np.hypot(d[:, 0], d[:, 1]) == 0.0):
            raise ValueError("consecutive polyline vertices must be distinct")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if _self_intersects(v, self.closed):
            raise ValueError("polyline self-intersects")

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        if not isinstance(other, Polyline2D):
            return NotImplemented
        return self.closed == other.closed and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash((self.closed, self.vertices.tobytes()))

    @property
    def length(self) -> float:
        d = np.diff(self.vertices, axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_cross(p1, p2, q1, q2):
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _self_intersects(v: np.ndarray, closed: bool) -> bool:
    n = len(v)
    segs = [(v[i], v[i + 1]) for i in range(n - 1)]
    if closed:
        segs.append((v[-1], v[0]))
    m = len(segs)
    if m < 3:
        return False
    for i in range(m):
        for j in range(i + 2, m):
            if closed and i == 0 and j == m - 1:
                continue
            if _segments_cross(*segs[i], *segs[j]):
                return True
    return False


@dataclass(frozen=True)
class GuideCurve:
    """Two-parameter guide profile plus the port dimensions it spans.

    Angles are in degrees, lengths in meters.
    """

    theta: float
    weight: float
    mouth_halfwidth: float = 0.18
    throat_halfwidth: float = 0.115
    depth: float = 0.15
    p1_mode: str = "tangent"

    def __post_init__(self):
        if not (0.0 <= self.theta <= 90.0):
            raise ValueError(f"theta must lie in [0, 90] degrees, got {self.theta}")
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")
        if not (self.mouth_halfwidth > self.throat_halfwidth > 0.0):
            raise ValueError("need mouth_halfwidth > throat_halfwidth > 0")
        if not self.depth > 0.0:
            raise ValueError("depth must be positive")
        if self.p1_mode not in P1_MODES:
            raise ValueError(f"p1_mode must be one of {P1_MODES}")


def _tangent_exit(curve: GuideCurve) -> np.ndarray:
    """Where the throat tangent line, walked back toward the mouth, leaves the guide box."""
    m, t, d = curve.mouth_halfwidth, curve.throat_halfwidth, curve.depth
    th = math.radians(curve.theta)
    c, s = math.cos(th), math.sin(th)
    if curve.theta == 90.0:
        c = 0.0
    reach_mouth_line = (m - t) / s if s > 0.0 else math.inf
    reach_mouth_plane = d / c if c > 0.0 else math.inf
    r = min(reach_mouth_line, reach_mouth_plane)
    return np.array([d - r * c, t + r * s])


def control_points(curve: GuideCurve) -> np.ndarray:
    """Return the 3x2 array ``[P0, P1, P2]`` for ``curve``."""
    p0 = np.array([0.0, curve.mouth_halfwidth])
    p2 = np.array([curve.depth, curve.throat_halfwidth])
    q = _tangent_exit(curve)
    if curve.p1_mode == "tangent":
        p1 = p2 + curve.weight * (q - p2)
        if np.array_equal(p1, p2):
            raise DegenerateGeometryError(
                f"theta={curve.theta}, weight={curve.weight}: P1 coincides with the throat point"
            )
    else:
        if q[1] < curve.mouth_halfwidth:
            raise DegenerateGeometryError(
                f"theta={curve.theta}: throat tangent never reaches the mouth line inside the guide box"
            )
        p1 = p0 + curve.weight * (q - p0)
        if np.array_equal(p1, p0):
            raise DegenerateGeometryError(f"weight={curve.weight}: P1 coincides with the mouth corner")
    if not (0.0 <= p1[0] <= curve.depth):
        raise DegenerateGeometryError(f"P1={p1.tolist()} lies outside [mouth plane, throat plane]")
    return np.vstack([p0, p1, p2])


def bezier_point(cp: np.ndarray, t):
    """Evaluate a quadratic Bezier with control points ``cp`` at scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    u = 1.0 - t
    pts = (u * u)[..., None] * cp[0] + (2.0 * u * t)[..., None] * cp[1] + (t * t)[..., None] * cp[2]
    return pts


def evaluate(curve: GuideCurve, t: float) -> np.ndarray:
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return bezier_point(control_points(curve), t)


def discretize_points(cp: np.ndarray, max_chord_error: float = DEFAULT_CHORD_ERROR) -> Polyline2D:
    """Uniform-parameter polyline through a quadratic Bezier.

    The chord of a sub-span of parameter length ``h`` deviates from the curve by at
    most ``h**2 * |P0 - 2 P1 + P2| / 4``, so ``n`` spans suffice once that bound is
    below ``max_chord_error``.
    """
    if not max_chord_error > 0.0:
        raise ValueError("max_chord_error must be positive")
    cp = np.asarray(cp, dtype=float)
    second = float(np.hypot(*(cp[0] - 2.0 * cp[1] + cp[2])))
    n = max(1, math.ceil(math.sqrt(second / (4.0 * max_chord_error)))) if second > 0.0 else 1
    pts = bezier_point(cp, np.linspace(0.0, 1.0, n + 1))
    pts[0], pts[-1] = cp[0], cp[2]
    return Polyline2D(pts)


def discretize(curve: GuideCurve, max_chord_error: float = DEFAULT_CHORD_ERROR) -> Polyline2D:
    return discretize_points(control_points(curve), max_chord_error)


def mirror(polyline: Polyline2D) -> Polyline2D:
    """Reflect across the approach axis (y -> -y)."""
    v = polyline.vertices.copy()
    v[:, 1] = -v[:, 1]
    return Polyline2D(v, closed=polyline.closed)


def straight_wall(curve: GuideCurve) -> Polyline2D:
    """Chamfer from mouth corner straight to the throat."""
    return Polyline2D([[0.0, curve.mouth_halfwidth], [curve.depth, curve.throat_halfwidth]])
