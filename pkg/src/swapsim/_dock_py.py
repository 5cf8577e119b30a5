"""Pure-Python docking kernel (fallback for the compiled ``_dock_core``).

World layout: the approach axis is +x, the mouth plane is x = 0.  The upper
solid is every point with ``0 <= x <= x_end`` and ``y >= profile(x)``; the
lower solid is its mirror.  ``prof_x``/``prof_y`` hold the upper boundary from
the mouth corner through the guide and the throat channel; the hub face is the
vertical segment from ``(0, face_top)`` down to the mouth corner.

The rover outline is a convex CCW polygon in body coordinates whose origin is
the front-centre reference point.

Status codes returned by :func:`simulate`: 0 success, 1 wedged, 2 missed port,
3 step cap exceeded, 4 reached hardstop out of tolerance.
"""

import math

SLOP = 1e-7
EPS = 1e-12
MAX_ROT = 0.1

OK = 0
WEDGED = 1
MISSED_PORT = 2
EXCEEDED_STEPS = 3
OUT_OF_TOLERANCE = 4


def _profile_at(prof_x, prof_y, x):
    n = len(prof_x)
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if prof_x[mid] <= x:
            lo = mid
        else:
            hi = mid
    x0, x1 = prof_x[lo], prof_x[hi]
    if x1 <= x0:
        return max(prof_y[lo], prof_y[hi])
    f = (x - x0) / (x1 - x0)
    return prof_y[lo] + f * (prof_y[hi] - prof_y[lo])


def _closest_on_seg(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    t = ((px - ax) * dx + (py - ay) * dy) / ll
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    cx, cy = ax + t * dx, ay + t * dy
    return cx, cy, (px - cx) * (px - cx) + (py - cy) * (py - cy)


def _world(rx, ry, x, y, psi):
    c, s = math.cos(psi), math.sin(psi)
    wx = [x + c * rx[i] - s * ry[i] for i in range(len(rx))]
    wy = [y + s * rx[i] + c * ry[i] for i in range(len(rx))]
    return wx, wy


def find_contacts(prof_x, prof_y, face_top, rx, ry, x, y, psi, margin=0.0):
    """Return contacts as ``(depth, nx, ny, px, py, side)`` tuples.

    ``depth`` is positive for penetration and in ``[-margin, 0]`` for near misses.
    ``(nx, ny)`` is the unit direction the rover must move to clear the contact,
    ``(px, py)`` the contact point, ``side`` +1 for the upper wall, -1 lower.
    """
    wx, wy = _world(rx, ry, x, y, psi)
    nv = len(wx)
    np_ = len(prof_x)
    x_end = prof_x[np_ - 1]
    y_low = prof_y[np_ - 1]
    out = []
    xmin, xmax = min(wx) - margin, max(wx) + margin
    ymin, ymax = min(wy) - margin, max(wy) + margin

    # rover vertices against the solid
    for i in range(nv):
        px, py = wx[i], wy[i]
        if px < -margin or px > x_end:
            continue
        for side in (1, -1):
            sy = py * side
            if sy < y_low - margin:
                continue
            # nearest boundary feature, working in the upper-wall frame
            best = math.inf
            gap = 0.0
            bnx = bny = 0.0
            for k in range(-1, np_ - 1):
                if k < 0:
                    ax, ay, bx, by = 0.0, face_top, prof_x[0], prof_y[0]
                else:
                    ax, ay, bx, by = prof_x[k], prof_y[k], prof_x[k + 1], prof_y[k + 1]
                dx, dy = bx - ax, by - ay
                ll = dx * dx + dy * dy
                t = ((px - ax) * dx + (sy - ay) * dy) / ll
                if 0.0 < t < 1.0:
                    el = math.sqrt(ll)
                    # free side of a mouth-to-channel segment is on its right
                    nx, ny = dy / el, -dx / el
                    g = (px - ax) * nx + (sy - ay) * ny
                    dist = abs(g)
                else:
                    cx, cy = (ax, ay) if t <= 0.0 else (bx, by)
                    ex, ey = px - cx, sy - cy
                    dist = math.sqrt(ex * ex + ey * ey)
                    if dist == 0.0:
                        continue
                    nx, ny = ex / dist, ey / dist
                    g = dist
                if dist < best:
                    best, gap, bnx, bny = dist, g, nx, ny
            inside = px >= 0.0 and sy >= _profile_at(prof_x, prof_y, px)
            if inside:
                if best <= EPS:
                    continue
                if gap > 0.0:
                    bnx, bny = -bnx, -bny
                out.append((best, bnx, bny * side, px, py, side))
            elif best <= margin:
                if gap < 0.0:
                    bnx, bny = -bnx, -bny
                out.append((-best, bnx, bny * side, px, py, side))

    # wall vertices against the rover
    for k in range(np_):
        qx = prof_x[k]
        if qx < xmin or qx > xmax:
            continue
        for side in (1, -1):
            qy = prof_y[k] * side
            if qy < ymin or qy > ymax:
                continue
            depth = math.inf
            bnx = bny = 0.0
            inside = True
            for i in range(nv):
                j = i + 1 if i + 1 < nv else 0
                ex, ey = wx[j] - wx[i], wy[j] - wy[i]
                el = math.sqrt(ex * ex + ey * ey)
                # outward normal of a CCW edge
                onx, ony = ey / el, -ex / el
                s = -((qx - wx[i]) * onx + (qy - wy[i]) * ony)
                if s <= 0.0:
                    inside = False
                    break
                if s < depth:
                    depth, bnx, bny = s, onx, ony
            if inside and depth > EPS:
                out.append((depth, -bnx, -bny, qx, qy, side))
            elif not inside and margin > 0.0:
                best = math.inf
                cx = cy = 0.0
                for i in range(nv):
                    j = i + 1 if i + 1 < nv else 0
                    ux, uy, d2 = _closest_on_seg(qx, qy, wx[i], wy[i], wx[j], wy[j])
                    if d2 < best:
                        best, cx, cy = d2, ux, uy
                d = math.sqrt(best)
                if 0.0 < d <= margin:
                    out.append((-d, (cx - qx) / d, (cy - qy) / d, qx, qy, side))
    return out


def _solve_correction(rows, rhs, rho2, sweeps):
    """Minimise dx^2 + dy^2 + rho2*dpsi^2 subject to rows . (dx, dy, dpsi) >= rhs.

    Projected Gauss-Seidel on the dual.  Returns ``(dx, dy, dpsi, residual)``
    with ``residual`` the worst remaining constraint violation.
    """
    m = len(rows)
    inv = (1.0, 1.0, 1.0 / rho2)
    lam = [0.0] * m
    dq = [0.0, 0.0, 0.0]
    diag = [r[0] * r[0] * inv[0] + r[1] * r[1] * inv[1] + r[2] * r[2] * inv[2] for r in rows]
    for _ in range(sweeps):
        change = 0.0
        for i in range(m):
            r = rows[i]
            if diag[i] <= 0.0:
                continue
            slack = r[0] * dq[0] + r[1] * dq[1] + r[2] * dq[2] - rhs[i]
            new = lam[i] - slack / diag[i]
            if new < 0.0:
                new = 0.0
            dl = new - lam[i]
            if dl != 0.0:
                lam[i] = new
                dq[0] += dl * r[0] * inv[0]
                dq[1] += dl * r[1] * inv[1]
                dq[2] += dl * r[2] * inv[2]
                if abs(dl) > change:
                    change = abs(dl)
        if change < 1e-15:
            break
    worst = 0.0
    for i in range(m):
        r = rows[i]
        v = rhs[i] - (r[0] * dq[0] + r[1] * dq[1] + r[2] * dq[2])
        if v > worst:
            worst = v
    return dq[0], dq[1], dq[2], worst


def resolve(prof_x, prof_y, face_top, rx, ry, x, y, psi, max_iter, margin, mu, rho):
    """Project the rover out of the walls with a minimal correction.

    Each round linearises every contact (penetrating or within ``margin``)
    about the deepest contact point and solves for the cheapest translation
    plus yaw about that point that clears all of them.  A lone contact is
    therefore undone by a pure translation along its normal; rotation only
    enters when contacts on opposite walls pull against each other.  A
    contact whose normal opposes the approach direction to within the friction
    angle ``atan(mu)`` cannot slide and must be cleared by backing out along
    -x.  Returns ``(x, y, psi, ok)``.
    """
    rho2 = rho * rho
    for _ in range(max_iter):
        cs = find_contacts(prof_x, prof_y, face_top, rx, ry, x, y, psi, margin)
        deep = None
        for c in cs:
            if c[0] > 0.0 and (deep is None or c[0] > deep[0]):
                deep = c
        if deep is None:
            return x, y, psi, True
        ox, oy = deep[3], deep[4]
        rows = []
        rhs = []
        for c in cs:
            nx, ny = c[1], c[2]
            b = c[0] + SLOP if c[0] > 0.0 else c[0]
            if nx < 0.0 and abs(ny) <= -mu * nx:
                b = b / -nx
                nx, ny = -1.0, 0.0
            ax, ay = c[3] - ox, c[4] - oy
            rows.append((nx, ny, -ay * nx + ax * ny))
            rhs.append(b)
        dx, dy, dpsi, worst = _solve_correction(rows, rhs, rho2, 200)
        if worst > 0.5 * deep[0] + SLOP:
            return x, y, psi, False
        if dpsi > MAX_ROT:
            dpsi = MAX_ROT
        elif dpsi < -MAX_ROT:
            dpsi = -MAX_ROT
        c, s = math.cos(dpsi), math.sin(dpsi)
        px, py = x - ox, y - oy
        x = ox + c * px - s * py + dx
        y = oy + s * px + c * py + dy
        psi += dpsi
    for c in find_contacts(prof_x, prof_y, face_top, rx, ry, x, y, psi):
        if c[0] > 0.0:
            return x, y, psi, False
    return x, y, psi, True


def seat(prof_x, prof_y, face_top, rx, ry, x, y, psi, max_iter, margin, mu, rho):
    """Square the rover against the paired hardstops.

    The leading front point touches its stop first; pushing on rotates the body
    about that point until the second tab lands, i.e. yaw goes to zero, after
    which the walls get a chance to push it back out of penetration.
    """
    wx, wy = _world(rx, ry, x, y, psi)
    lead = 0
    for i in range(1, len(wx)):
        if wx[i] > wx[lead]:
            lead = i
    c, s = math.cos(-psi), math.sin(-psi)
    ox, oy = x - wx[lead], y - wy[lead]
    x = wx[lead] + c * ox - s * oy
    y = wy[lead] + s * ox + c * oy
    return resolve(prof_x, prof_y, face_top, rx, ry, x, y, 0.0, max_iter, margin, mu, rho)


def simulate(prof_x, prof_y, face_top, rx, ry, x, y, psi, step, hardstop_x,
             lat_tol, yaw_tol, max_steps, max_iter, stall_window, stall_dist, margin, mu, rho, record):
    """Push the rover along +x until it reaches the hardstop or fails.

    Returns ``(status, x, y, psi, steps, traj)`` where ``traj`` is a flat list
    ``[x0, y0, psi0, x1, ...]`` when ``record`` is true, else empty.
    """
    traj = [x, y, psi] if record else []
    mark_x = x
    steps = 0
    while steps < max_steps:
        wx, wy = _world(rx, ry, x, y, psi)
        if max(wx) >= hardstop_x:
            x, y, psi, ok = seat(prof_x, prof_y, face_top, rx, ry, x, y, psi, max_iter, margin, mu, rho)
            if record:
                traj.extend((x, y, psi))
            if ok and abs(y) <= lat_tol and abs(psi) <= yaw_tol:
                return OK, x, y, psi, steps, traj
            return OUT_OF_TOLERANCE, x, y, psi, steps, traj
        x += step
        x, y, psi, ok = resolve(prof_x, prof_y, face_top, rx, ry, x, y, psi, max_iter, margin, mu, rho)
        steps += 1
        if record:
            traj.extend((x, y, psi))
        if not ok:
            return WEDGED, x, y, psi, steps, traj
        if steps % stall_window == 0:
            if x - mark_x < stall_dist:
                code = MISSED_PORT if x < 0.0 else WEDGED
                return code, x, y, psi, steps, traj
            mark_x = x
    return EXCEEDED_STEPS, x, y, psi, steps, traj
