# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled docking kernel.

Statement-for-statement port of ``_dock_py``; both must return identical
floats for identical inputs (no fast-math, no FMA contraction).
"""

from libc.math cimport sqrt, cos, sin, fabs, INFINITY
from libc.stdlib cimport malloc, free

cdef double SLOP = 1e-7
cdef double EPS = 1e-12
cdef double MAX_ROT = 0.1

OK = 0
WEDGED = 1
MISSED_PORT = 2
EXCEEDED_STEPS = 3
OUT_OF_TOLERANCE = 4


cdef struct Geo:
    const double* px
    const double* py
    int np
    double face_top
    const double* rx
    const double* ry
    int nv
    double* wx
    double* wy


cdef struct Contacts:
    int n
    int cap
    double* d
    double* nx
    double* ny
    double* cx
    double* cy
    int* side


cdef inline double _profile_at(Geo* g, double x) noexcept nogil:
    cdef int lo = 0, hi = g.np - 1, mid
    cdef double x0, x1, f
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if g.px[mid] <= x:
            lo = mid
        else:
            hi = mid
    x0 = g.px[lo]
    x1 = g.px[hi]
    if x1 <= x0:
        return g.py[lo] if g.py[lo] > g.py[hi] else g.py[hi]
    f = (x - x0) / (x1 - x0)
    return g.py[lo] + f * (g.py[hi] - g.py[lo])


cdef inline void _world(Geo* g, double x, double y, double psi) noexcept nogil:
    cdef double c = cos(psi), s = sin(psi)
    cdef int i
    for i in range(g.nv):
        g.wx[i] = x + c * g.rx[i] - s * g.ry[i]
        g.wy[i] = y + s * g.rx[i] + c * g.ry[i]


cdef inline void _push(Contacts* cs, double d, double nx, double ny, double px, double py, int side) noexcept nogil:
    if cs.n >= cs.cap:
        return
    cs.d[cs.n] = d
    cs.nx[cs.n] = nx
    cs.ny[cs.n] = ny
    cs.cx[cs.n] = px
    cs.cy[cs.n] = py
    cs.side[cs.n] = side
    cs.n += 1


cdef void _find(Geo* g, double x, double y, double psi, double margin, Contacts* cs) noexcept nogil:
    cdef int i, j, k, si, side, nv = g.nv, np_ = g.np
    cdef double x_end = g.px[np_ - 1]
    cdef double y_low = g.py[np_ - 1]
    cdef double xmin, xmax, ymin, ymax
    cdef double px, py, sy, best, gap, bnx, bny, ax, ay, bx, by, dx, dy, ll, t, el, nx, ny, gg, dist
    cdef double cx, cy, ex, ey, qx, qy, depth, onx, ony, s, ux, uy, d2, d
    cdef bint inside
    cs.n = 0
    _world(g, x, y, psi)
    xmin = g.wx[0]
    xmax = g.wx[0]
    ymin = g.wy[0]
    ymax = g.wy[0]
    for i in range(1, nv):
        if g.wx[i] < xmin:
            xmin = g.wx[i]
        if g.wx[i] > xmax:
            xmax = g.wx[i]
        if g.wy[i] < ymin:
            ymin = g.wy[i]
        if g.wy[i] > ymax:
            ymax = g.wy[i]
    xmin -= margin
    xmax += margin
    ymin -= margin
    ymax += margin

    for i in range(nv):
        px = g.wx[i]
        py = g.wy[i]
        if px < -margin or px > x_end:
            continue
        for si in range(2):
            side = 1 - 2 * si
            sy = py * side
            if sy < y_low - margin:
                continue
            best = INFINITY
            gap = 0.0
            bnx = 0.0
            bny = 0.0
            for k in range(-1, np_ - 1):
                if k < 0:
                    ax = 0.0
                    ay = g.face_top
                    bx = g.px[0]
                    by = g.py[0]
                else:
                    ax = g.px[k]
                    ay = g.py[k]
                    bx = g.px[k + 1]
                    by = g.py[k + 1]
                dx = bx - ax
                dy = by - ay
                ll = dx * dx + dy * dy
                t = ((px - ax) * dx + (sy - ay) * dy) / ll
                if 0.0 < t < 1.0:
                    el = sqrt(ll)
                    nx = dy / el
                    ny = -dx / el
                    gg = (px - ax) * nx + (sy - ay) * ny
                    dist = fabs(gg)
                else:
                    if t <= 0.0:
                        cx = ax
                        cy = ay
                    else:
                        cx = bx
                        cy = by
                    ex = px - cx
                    ey = sy - cy
                    dist = sqrt(ex * ex + ey * ey)
                    if dist == 0.0:
                        continue
                    nx = ex / dist
                    ny = ey / dist
                    gg = dist
                if dist < best:
                    best = dist
                    gap = gg
                    bnx = nx
                    bny = ny
            inside = px >= 0.0 and sy >= _profile_at(g, px)
            if inside:
                if best <= EPS:
                    continue
                if gap > 0.0:
                    bnx = -bnx
                    bny = -bny
                _push(cs, best, bnx, bny * side, px, py, side)
            elif best <= margin:
                if gap < 0.0:
                    bnx = -bnx
                    bny = -bny
                _push(cs, -best, bnx, bny * side, px, py, side)

    for k in range(np_):
        qx = g.px[k]
        if qx < xmin or qx > xmax:
            continue
        for si in range(2):
            side = 1 - 2 * si
            qy = g.py[k] * side
            if qy < ymin or qy > ymax:
                continue
            depth = INFINITY
            bnx = 0.0
            bny = 0.0
            inside = True
            for i in range(nv):
                j = i + 1 if i + 1 < nv else 0
                ex = g.wx[j] - g.wx[i]
                ey = g.wy[j] - g.wy[i]
                el = sqrt(ex * ex + ey * ey)
                onx = ey / el
                ony = -ex / el
                s = -((qx - g.wx[i]) * onx + (qy - g.wy[i]) * ony)
                if s <= 0.0:
                    inside = False
                    break
                if s < depth:
                    depth = s
                    bnx = onx
                    bny = ony
            if inside and depth > EPS:
                _push(cs, depth, -bnx, -bny, qx, qy, side)
            elif not inside and margin > 0.0:
                best = INFINITY
                cx = 0.0
                cy = 0.0
                for i in range(nv):
                    j = i + 1 if i + 1 < nv else 0
                    dx = g.wx[j] - g.wx[i]
                    dy = g.wy[j] - g.wy[i]
                    ll = dx * dx + dy * dy
                    t = ((qx - g.wx[i]) * dx + (qy - g.wy[i]) * dy) / ll
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                    ux = g.wx[i] + t * dx
                    uy = g.wy[i] + t * dy
                    d2 = (qx - ux) * (qx - ux) + (qy - uy) * (qy - uy)
                    if d2 < best:
                        best = d2
                        cx = ux
                        cy = uy
                d = sqrt(best)
                if 0.0 < d <= margin:
                    _push(cs, -d, (cx - qx) / d, (cy - qy) / d, qx, qy, side)


cdef double _solve(int m, double* r0, double* r1, double* r2, double* rhs, double rho2, int sweeps,
                   double* lam, double* out) noexcept nogil:
    cdef double inv2 = 1.0 / rho2
    cdef double q0 = 0.0, q1 = 0.0, q2 = 0.0
    cdef double diag, slack, new, dl, change, worst, v
    cdef int it, i
    for i in range(m):
        lam[i] = 0.0
    for it in range(sweeps):
        change = 0.0
        for i in range(m):
            diag = r0[i] * r0[i] * 1.0 + r1[i] * r1[i] * 1.0 + r2[i] * r2[i] * inv2
            if diag <= 0.0:
                continue
            slack = r0[i] * q0 + r1[i] * q1 + r2[i] * q2 - rhs[i]
            new = lam[i] - slack / diag
            if new < 0.0:
                new = 0.0
            dl = new - lam[i]
            if dl != 0.0:
                lam[i] = new
                q0 += dl * r0[i] * 1.0
                q1 += dl * r1[i] * 1.0
                q2 += dl * r2[i] * inv2
                if fabs(dl) > change:
                    change = fabs(dl)
        if change < 1e-15:
            break
    worst = 0.0
    for i in range(m):
        v = rhs[i] - (r0[i] * q0 + r1[i] * q1 + r2[i] * q2)
        if v > worst:
            worst = v
    out[0] = q0
    out[1] = q1
    out[2] = q2
    return worst


cdef struct Work:
    Contacts cs
    double* r0
    double* r1
    double* r2
    double* rhs
    double* lam


cdef bint _resolve(Geo* g, Work* w, double* st, int max_iter, double margin, double mu, double rho) noexcept nogil:
    """``st`` holds the pose and is updated in place; returns ok."""
    cdef double rho2 = rho * rho
    cdef int it, i, deep, m
    cdef double ox, oy, nx, ny, b, ax, ay, worst, dpsi, c, s, px, py
    cdef double dq[3]
    cdef Contacts* cs = &w.cs
    for it in range(max_iter):
        _find(g, st[0], st[1], st[2], margin, cs)
        deep = -1
        for i in range(cs.n):
            if cs.d[i] > 0.0 and (deep < 0 or cs.d[i] > cs.d[deep]):
                deep = i
        if deep < 0:
            return True
        ox = cs.cx[deep]
        oy = cs.cy[deep]
        m = cs.n
        for i in range(m):
            nx = cs.nx[i]
            ny = cs.ny[i]
            b = cs.d[i] + SLOP if cs.d[i] > 0.0 else cs.d[i]
            if nx < 0.0 and fabs(ny) <= -mu * nx:
                b = b / -nx
                nx = -1.0
                ny = 0.0
            ax = cs.cx[i] - ox
            ay = cs.cy[i] - oy
            w.r0[i] = nx
            w.r1[i] = ny
            w.r2[i] = -ay * nx + ax * ny
            w.rhs[i] = b
        worst = _solve(m, w.r0, w.r1, w.r2, w.rhs, rho2, 200, w.lam, dq)
        if worst > 0.5 * cs.d[deep] + SLOP:
            return False
        dpsi = dq[2]
        if dpsi > MAX_ROT:
            dpsi = MAX_ROT
        elif dpsi < -MAX_ROT:
            dpsi = -MAX_ROT
        c = cos(dpsi)
        s = sin(dpsi)
        px = st[0] - ox
        py = st[1] - oy
        st[0] = ox + c * px - s * py + dq[0]
        st[1] = oy + s * px + c * py + dq[1]
        st[2] += dpsi
    _find(g, st[0], st[1], st[2], 0.0, cs)
    for i in range(cs.n):
        if cs.d[i] > 0.0:
            return False
    return True


cdef bint _seat(Geo* g, Work* w, double* st, int max_iter, double margin, double mu, double rho) noexcept nogil:
    cdef int lead = 0, i
    cdef double c, s, ox, oy
    _world(g, st[0], st[1], st[2])
    for i in range(1, g.nv):
        if g.wx[i] > g.wx[lead]:
            lead = i
    c = cos(-st[2])
    s = sin(-st[2])
    ox = st[0] - g.wx[lead]
    oy = st[1] - g.wy[lead]
    st[0] = g.wx[lead] + c * ox - s * oy
    st[1] = g.wy[lead] + s * ox + c * oy
    st[2] = 0.0
    return _resolve(g, w, st, max_iter, margin, mu, rho)


cdef class _Kernel:
    cdef Geo g
    cdef Work w
    cdef double[::1] _px, _py, _rx, _ry

    def __cinit__(self, prof_x, prof_y, double face_top, rx, ry):
        import numpy as np
        self._px = np.ascontiguousarray(prof_x, dtype=np.float64)
        self._py = np.ascontiguousarray(prof_y, dtype=np.float64)
        self._rx = np.ascontiguousarray(rx, dtype=np.float64)
        self._ry = np.ascontiguousarray(ry, dtype=np.float64)
        if self._px.shape[0] < 2 or self._px.shape[0] != self._py.shape[0]:
            raise ValueError("profile needs matching x/y arrays of length >= 2")
        if self._rx.shape[0] < 3 or self._rx.shape[0] != self._ry.shape[0]:
            raise ValueError("rover outline needs matching x/y arrays of length >= 3")
        self.g.px = &self._px[0]
        self.g.py = &self._py[0]
        self.g.np = self._px.shape[0]
        self.g.face_top = face_top
        self.g.rx = &self._rx[0]
        self.g.ry = &self._ry[0]
        self.g.nv = self._rx.shape[0]
        self.g.wx = <double*> malloc(self.g.nv * sizeof(double))
        self.g.wy = <double*> malloc(self.g.nv * sizeof(double))
        cap = 2 * (self.g.nv + self.g.np) + 4
        self.w.cs.cap = cap
        self.w.cs.n = 0
        self.w.cs.d = <double*> malloc(cap * sizeof(double))
        self.w.cs.nx = <double*> malloc(cap * sizeof(double))
        self.w.cs.ny = <double*> malloc(cap * sizeof(double))
        self.w.cs.cx = <double*> malloc(cap * sizeof(double))
        self.w.cs.cy = <double*> malloc(cap * sizeof(double))
        self.w.cs.side = <int*> malloc(cap * sizeof(int))
        self.w.r0 = <double*> malloc(cap * sizeof(double))
        self.w.r1 = <double*> malloc(cap * sizeof(double))
        self.w.r2 = <double*> malloc(cap * sizeof(double))
        self.w.rhs = <double*> malloc(cap * sizeof(double))
        self.w.lam = <double*> malloc(cap * sizeof(double))
        if (self.g.wx == NULL or self.g.wy == NULL or self.w.cs.d == NULL or self.w.cs.nx == NULL
                or self.w.cs.ny == NULL or self.w.cs.cx == NULL or self.w.cs.cy == NULL
                or self.w.cs.side == NULL or self.w.r0 == NULL or self.w.r1 == NULL
                or self.w.r2 == NULL or self.w.rhs == NULL or self.w.lam == NULL):
            raise MemoryError()

    def __dealloc__(self):
        free(self.g.wx)
        free(self.g.wy)
        free(self.w.cs.d)
        free(self.w.cs.nx)
        free(self.w.cs.ny)
        free(self.w.cs.cx)
        free(self.w.cs.cy)
        free(self.w.cs.side)
        free(self.w.r0)
        free(self.w.r1)
        free(self.w.r2)
        free(self.w.rhs)
        free(self.w.lam)

    def contacts(self, double x, double y, double psi, double margin):
        _find(&self.g, x, y, psi, margin, &self.w.cs)
        cs = &self.w.cs
        return [(cs.d[i], cs.nx[i], cs.ny[i], cs.cx[i], cs.cy[i], cs.side[i]) for i in range(cs.n)]

    def resolve(self, double x, double y, double psi, int max_iter, double margin, double mu, double rho):
        cdef double st[3]
        cdef bint ok
        st[0] = x
        st[1] = y
        st[2] = psi
        with nogil:
            ok = _resolve(&self.g, &self.w, st, max_iter, margin, mu, rho)
        return st[0], st[1], st[2], bool(ok)

    def simulate(self, double x, double y, double psi, double step, double hardstop_x,
                 double lat_tol, double yaw_tol, long max_steps, int max_iter, long stall_window,
                 double stall_dist, double margin, double mu, double rho, bint record):
        cdef double st[3]
        cdef long steps = 0
        cdef double mark_x = x, front
        cdef int i, status = -1
        cdef bint ok
        traj = [x, y, psi] if record else []
        st[0] = x
        st[1] = y
        st[2] = psi
        while steps < max_steps:
            _world(&self.g, st[0], st[1], st[2])
            front = self.g.wx[0]
            for i in range(1, self.g.nv):
                if self.g.wx[i] > front:
                    front = self.g.wx[i]
            if front >= hardstop_x:
                ok = _seat(&self.g, &self.w, st, max_iter, margin, mu, rho)
                if record:
                    traj.extend((st[0], st[1], st[2]))
                if ok and fabs(st[1]) <= lat_tol and fabs(st[2]) <= yaw_tol:
                    status = OK
                else:
                    status = OUT_OF_TOLERANCE
                break
            st[0] += step
            ok = _resolve(&self.g, &self.w, st, max_iter, margin, mu, rho)
            steps += 1
            if record:
                traj.extend((st[0], st[1], st[2]))
            if not ok:
                status = WEDGED
                break
            if steps % stall_window == 0:
                if st[0] - mark_x < stall_dist:
                    status = MISSED_PORT if st[0] < 0.0 else WEDGED
                    break
                mark_x = st[0]
        if status < 0:
            status = EXCEEDED_STEPS
        return status, st[0], st[1], st[2], steps, traj


def find_contacts(prof_x, prof_y, face_top, rx, ry, x, y, psi, margin=0.0):
    return _Kernel(prof_x, prof_y, face_top, rx, ry).contacts(x, y, psi, margin)


def resolve(prof_x, prof_y, face_top, rx, ry, x, y, psi, max_iter, margin, mu, rho):
    return _Kernel(prof_x, prof_y, face_top, rx, ry).resolve(x, y, psi, max_iter, margin, mu, rho)


def simulate(prof_x, prof_y, face_top, rx, ry, x, y, psi, step, hardstop_x,
             lat_tol, yaw_tol, max_steps, max_iter, stall_window, stall_dist, margin, mu, rho, record):
    k = _Kernel(prof_x, prof_y, face_top, rx, ry)
    return k.simulate(x, y, psi, step, hardstop_x, lat_tol, yaw_tol, max_steps, max_iter,
                      stall_window, stall_dist, margin, mu, rho, record)
