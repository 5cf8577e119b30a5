"""Quickhull in three dimensions and hull volumes of success regions.

Success-region clouds mix units (axial m, lateral m, yaw deg), so a hull
volume is in m*m*deg.  Only ratios between design iterations are meaningful.

Determinism: the initial simplex and every farthest-point choice take the
lowest point index among ties, and faces are processed in creation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PLANE_EPS = 1e-9  # points closer than this to a common plane count as coplanar
_VISIBLE_EPS = 1e-10  # a point must clear a face by this much to be "outside"

AXES = ("axial_m", "lateral_m", "yaw_deg")


class TooFewPointsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PointCloud3:
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("point coordinates must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Hull3:
    """Convex hull; ``faces`` index into ``points`` and wind counter-clockwise seen from outside."""

    points: np.ndarray = field(repr=False)
    vertices: np.ndarray  # sorted indices of hull vertices
    faces: np.ndarray  # (m, 3) int
    volume: float
    degenerate: bool = False

    @property
    def vertex_points(self) -> np.ndarray:
        return self.points[self.vertices]

    def planes(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit outward normals and offsets: inside means ``n . p <= d``."""
        if len(self.faces) == 0:
            return np.zeros((0, 3)), np.zeros(0)
        a, b, c = (self.points[self.faces[:, k]] for k in range(3))
        n = np.cross(b - a, c - a)
        n /= np.linalg.norm(n, axis=1)[:, None]
        return n, np.einsum("ij,ij->i", n, a)

    def contains(self, pts: np.ndarray, slack: float = 0.0) -> np.ndarray:
        """Point-in-hull by signed distance to every face plane."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.degenerate:
            return np.zeros(len(pts), dtype=bool)
        n, d = self.planes()
        return np.all(pts @ n.T - d <= slack, axis=1)


def _plane(p, a, b, c):
    n = np.cross(p[b] - p[a], p[c] - p[a])
    norm = np.linalg.norm(n)
    n = n / norm
    return n, float(n @ p[a])


def _initial_simplex(p: np.ndarray):
    """Four affinely independent points, or None when the cloud is flat."""
    extremes = []
    for k in range(3):
        extremes.append(int(np.argmin(p[:, k])))
        extremes.append(int(np.argmax(p[:, k])))
    best, i0, i1 = -1.0, 0, 0
    for i in extremes:
        d = np.linalg.norm(p - p[i], axis=1)
        j = int(np.argmax(d))
        if d[j] > best:
            best, i0, i1 = d[j], i, j
    if best <= PLANE_EPS:
        return None
    if i0 > i1:
        i0, i1 = i1, i0
    u = (p[i1] - p[i0]) / best
    rel = p - p[i0]
    off = np.linalg.norm(rel - np.outer(rel @ u, u), axis=1)
    i2 = int(np.argmax(off))
    if off[i2] <= PLANE_EPS:
        return None
    n = np.cross(p[i1] - p[i0], p[i2] - p[i0])
    n /= np.linalg.norm(n)
    h = rel @ n
    i3 = int(np.argmax(np.abs(h)))
    if abs(h[i3]) <= PLANE_EPS:
        return None
    return i0, i1, i2, i3


def _flat_hull(p: np.ndarray) -> Hull3:
    ext = sorted({int(np.argmin(p[:, k])) for k in range(3)} | {int(np.argmax(p[:, k])) for k in range(3)})
    return Hull3(p, np.array(ext, dtype=int), np.zeros((0, 3), dtype=int), 0.0, True)


def quickhull3(cloud: PointCloud3 | np.ndarray) -> Hull3:
    """Convex hull of a 3D cloud.

    Coplanar or collinear clouds do not raise; they return volume 0 with
    ``degenerate=True``.  Fewer than four points raise ``TooFewPointsError``.
    """
    p = cloud.points if isinstance(cloud, PointCloud3) else PointCloud3(cloud).points
    if len(p) < 4:
        raise TooFewPointsError(f"need at least 4 points, got {len(p)}")
    simplex = _initial_simplex(p)
    if simplex is None:
        return _flat_hull(p)

    i0, i1, i2, i3 = simplex
    centre = p[[i0, i1, i2, i3]].mean(axis=0)
    faces: dict[int, list] = {}  # id -> [a, b, c, normal, offset, outside-indices]
    edges: dict[tuple[int, int], int] = {}  # directed edge -> face owning it
    next_id = 0

    def add_face(a, b, c):
        nonlocal next_id
        n, d = _plane(p, a, b, c)
        if n @ centre - d > 0.0:  # keep normals pointing away from the interior
            b, c = c, b
            n, d = -n, -d
        fid = next_id
        next_id += 1
        faces[fid] = [a, b, c, n, d, np.zeros(0, dtype=int)]
        for e in ((a, b), (b, c), (c, a)):
            edges[e] = fid
        return fid

    def drop_face(fid):
        a, b, c = faces[fid][:3]
        for e in ((a, b), (b, c), (c, a)):
            if edges.get(e) == fid:
                del edges[e]
        del faces[fid]

    def assign(candidates: np.ndarray, fids: list[int]):
        """Give each candidate to the first face (in creation order) it lies above."""
        rest = candidates
        for fid in fids:
            if len(rest) == 0:
                break
            f = faces[fid]
            dist = p[rest] @ f[3] - f[4]
            above = dist > _VISIBLE_EPS
            f[5] = rest[above]
            rest = rest[~above]

    first = [add_face(i0, i1, i2), add_face(i0, i1, i3), add_face(i0, i2, i3), add_face(i1, i2, i3)]
    others = np.setdiff1d(np.arange(len(p)), [i0, i1, i2, i3])
    assign(others, first)

    while True:
        pending = [fid for fid in faces if len(faces[fid][5])]
        if not pending:
            break
        fid = min(pending)
        f = faces[fid]
        out = f[5]
        dist = p[out] @ f[3] - f[4]
        eye = int(out[int(np.argmax(dist))])  # outside sets are index-sorted: ties keep the lowest index

        # faces visible from the eye, grown from fid across shared edges
        visible = {fid}
        stack = [fid]
        while stack:
            g = faces[stack.pop()]
            a, b, c = g[:3]
            for u, v in ((a, b), (b, c), (c, a)):
                nb = edges.get((v, u))
                if nb is None or nb in visible:
                    continue
                h = faces[nb]
                if p[eye] @ h[3] - h[4] > _VISIBLE_EPS:
                    visible.add(nb)
                    stack.append(nb)

        horizon = []
        for vid in sorted(visible):
            a, b, c = faces[vid][:3]
            for u, v in ((a, b), (b, c), (c, a)):
                if edges.get((v, u)) not in visible:
                    horizon.append((u, v))
        orphans = np.unique(np.concatenate([faces[vid][5] for vid in visible]))
        orphans = orphans[orphans != eye]
        for vid in sorted(visible):
            drop_face(vid)
        new = []
        for u, v in horizon:
            nid = next_id
            next_id += 1
            n, d = _plane(p, u, v, eye)
            faces[nid] = [u, v, eye, n, d, np.zeros(0, dtype=int)]
            for e in ((u, v), (v, eye), (eye, u)):
                edges[e] = nid
            new.append(nid)
        assign(orphans, new)

    tri = np.array([faces[k][:3] for k in sorted(faces)], dtype=int)
    verts = np.unique(tri)
    o = p[verts].mean(axis=0)
    a, b, c = p[tri[:, 0]] - o, p[tri[:, 1]] - o, p[tri[:, 2]] - o
    vol = float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)
    return Hull3(p, verts, tri, max(vol, 0.0), False)


def volume_oracle(cloud: PointCloud3 | np.ndarray, n_samples: int, rng: np.random.Generator,
                  batch: int = 200_000) -> tuple[float, float]:
    """Rejection-sampling estimate of the hull volume and its standard error.

    Uniform samples in the bounding box are kept when they lie on the inner
    side of every hull face plane.
    """
    hull = quickhull3(cloud)
    if hull.degenerate:
        return 0.0, 0.0
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    lo = hull.points.min(axis=0)
    hi = hull.points.max(axis=0)
    box = float(np.prod(hi - lo))
    n, d = hull.planes()
    hits = 0
    left = n_samples
    while left > 0:
        m = min(batch, left)
        x = lo + (hi - lo) * rng.random((m, 3))
        hits += int(np.count_nonzero(np.all(x @ n.T - d <= 0.0, axis=1)))
        left -= m
    f = hits / n_samples
    return box * f, box * float(np.sqrt(f * (1.0 - f) / n_samples))


def to_off(hull: Hull3, axes: tuple[str, str, str] = AXES) -> str:
    """Hull as an OFF mesh; only hull vertices are written."""
    remap = {int(v): i for i, v in enumerate(hull.vertices)}
    lines = ["OFF", f"# axes: {' '.join(axes)}", f"# volume: {hull.volume!r}",
             f"{len(hull.vertices)} {len(hull.faces)} 0"]
    for q in hull.vertex_points:
        lines.append(f"{q[0]!r} {q[1]!r} {q[2]!r}")
    for a, b, c in hull.faces:
        lines.append(f"3 {remap[int(a)]} {remap[int(b)]} {remap[int(c)]}")
    return "\n".join(lines) + "\n"
