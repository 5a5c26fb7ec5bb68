"""Compiled inner loops for force evaluation and integration.

All kernels release the GIL so a step can be split across threads by agent
range.  Each agent's force is summed in a fixed order (neighbours by
ascending id, then wall segments in table order), so the result does not
depend on how agents are split between workers.
"""

import math

import numba
import numpy as np

INERT, ACTIVE, EVACUATED = 0, 1, 2

# anomaly slots
AN_COINCIDENT = 0
AN_INSIDE_OBSTACLE = 1
AN_FIELD = 2
AN_SPEED_CLAMP = 3
AN_OUT_OF_BOUNDS = 4
N_ANOMALY = 5
ANOMALY_NAMES = ("coincident_centers", "inside_obstacle", "zero_field", "speed_clamp", "out_of_bounds")

_GOLDEN = 0.6180339887498949


@numba.njit(cache=True, nogil=True)
def pair_force(xi, yi, vxi, vyi, ri, idi, xj, yj, vxj, vyj, rj, idj, A, B, k, kappa):
    """Force on agent i from agent j; returns (fx, fy, coincident)."""
    dx = xi - xj
    dy = yi - yj
    d = math.sqrt(dx * dx + dy * dy)
    coincident = False
    if d < 1e-6:
        coincident = True
        lo = min(idi, idj)
        hi = max(idi, idj)
        frac = (lo * _GOLDEN + hi * _GOLDEN * _GOLDEN) % 1.0
        ang = 2.0 * math.pi * frac
        nx = math.cos(ang)
        ny = math.sin(ang)
        if idi < idj:
            nx = -nx
            ny = -ny
    else:
        nx = dx / d
        ny = dy / d
    tx = -ny
    ty = nx
    overlap = ri + rj - d
    mag = A * math.exp(overlap / B)
    fx = mag * nx
    fy = mag * ny
    if overlap > 0.0:
        dvt = (vxj - vxi) * tx + (vyj - vyi) * ty
        fx += k * overlap * nx + kappa * overlap * dvt * tx
        fy += k * overlap * ny + kappa * overlap * dvt * ty
    return fx, fy, coincident


@numba.njit(cache=True, nogil=True)
def wall_contact(px, py, qx, qy, vx, vy, r, snx, sny, A, B, k, kappa):
    """Force from a wall point q; (snx, sny) is the wall normal used if p sits on q."""
    dx = px - qx
    dy = py - qy
    d = math.sqrt(dx * dx + dy * dy)
    if d < 1e-12:
        nx = snx
        ny = sny
    else:
        nx = dx / d
        ny = dy / d
    tx = -ny
    ty = nx
    overlap = r - d
    mag = A * math.exp(overlap / B)
    fx = mag * nx
    fy = mag * ny
    if overlap > 0.0:
        dvt = -(vx * tx + vy * ty)
        fx += k * overlap * nx + kappa * overlap * dvt * tx
        fy += k * overlap * ny + kappa * overlap * dvt * ty
    return fx, fy


@numba.njit(cache=True, nogil=True)
def wall_force(px, py, vx, vy, r, kinds, w, h, cs, segs, s0, s1, A, B, k, kappa, cutoff):
    """Sum of wall repulsion over visible wall segments within the cutoff.

    Returns (fx, fy, inside_obstacle).  Coincident nearest points (shared
    corners) are counted once.
    """
    ix = int(math.floor(px / cs))
    iy = int(math.floor(py / cs))
    if 0 <= ix < w and 0 <= iy < h and kinds[iy * w + ix] == 0:
        # centre inside an obstacle: push out through the nearest open face
        best = 1e300
        nx = 0.0
        ny = 0.0
        qx = px
        qy = py
        for f in range(4):
            if f == 0:
                ddx, ddy, dist = 1, 0, (ix + 1) * cs - px
            elif f == 1:
                ddx, ddy, dist = 0, 1, (iy + 1) * cs - py
            elif f == 2:
                ddx, ddy, dist = -1, 0, px - ix * cs
            else:
                ddx, ddy, dist = 0, -1, py - iy * cs
            jx = ix + ddx
            jy = iy + ddy
            open_side = 0 <= jx < w and 0 <= jy < h and kinds[jy * w + jx] != 0
            if open_side and dist < best:
                best = dist
                nx = float(ddx)
                ny = float(ddy)
        if best == 1e300:
            nx = 1.0
            ny = 0.0
        fx, fy = wall_contact(0.0, 0.0, 0.0, 0.0, vx, vy, r, nx, ny, A, B, k, kappa)
        return fx, fy, True
    fx = 0.0
    fy = 0.0
    nseen = 0
    seen = np.empty((s1 - s0, 2))
    for s in range(s0, s1):
        ax = segs[s, 0]
        ay = segs[s, 1]
        bx = segs[s, 2]
        by = segs[s, 3]
        snx = segs[s, 4]
        sny = segs[s, 5]
        ex = bx - ax
        ey = by - ay
        t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        qx = ax + t * ex
        qy = ay + t * ey
        # only the face turned towards the agent
        if (px - qx) * snx + (py - qy) * sny <= 0.0:
            continue
        ddx = px - qx
        ddy = py - qy
        if math.sqrt(ddx * ddx + ddy * ddy) > cutoff:
            continue
        dup = False
        for m in range(nseen):
            if seen[m, 0] == qx and seen[m, 1] == qy:
                dup = True
                break
        if dup:
            continue
        seen[nseen, 0] = qx
        seen[nseen, 1] = qy
        nseen += 1
        gx, gy = wall_contact(px, py, qx, qy, vx, vy, r, snx, sny, A, B, k, kappa)
        fx += gx
        fy += gy
    return fx, fy, False


@numba.njit(cache=True, nogil=True)
def hash_keys(pos, region, state, hash_cell, hx, hy):
    n = pos.shape[0]
    keys = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if state[i] != ACTIVE:
            continue
        cx = min(max(int(math.floor(pos[i, 0] / hash_cell)), 0), hx - 1)
        cy = min(max(int(math.floor(pos[i, 1] / hash_cell)), 0), hy - 1)
        keys[i] = (region[i] * hy + cy) * hx + cx
    return keys


@numba.njit(cache=True, nogil=True)
def _driving(i, pos, vel, region, mass, v0, tau, speed_factor, kinds, kind_off, rw, rh, cs, vecs):
    reg = region[i]
    w = rw[reg]
    h = rh[reg]
    ix = int(math.floor(pos[i, 0] / cs))
    iy = int(math.floor(pos[i, 1] / cs))
    ex = 0.0
    ey = 0.0
    bad = True
    if 0 <= ix < w and 0 <= iy < h:
        c = kind_off[reg] + iy * w + ix
        if kinds[c] != 0:
            ex = vecs[c, 0]
            ey = vecs[c, 1]
            bad = False
    s = v0[i] * speed_factor[reg]
    m = mass[i]
    fx = m * (s * ex - vel[i, 0]) / tau[i]
    fy = m * (s * ey - vel[i, 1]) / tau[i]
    return fx, fy, bad


@numba.njit(cache=True, nogil=True)
def compute_forces(lo, hi, pos, vel, region, state, ids, mass, v0, tau, radius, speed_factor,
                   kinds, kind_off, rw, rh, cs, vecs, segs, seg_off,
                   A, B, k, kappa, cutoff,
                   keys_sorted, order, hash_cell, hx, hy,
                   drive, rep, anomalies):
    """Forces on agents ``lo..hi-1`` using the spatial hash for neighbours."""
    n_sorted = keys_sorted.shape[0]
    cand = np.empty(pos.shape[0], dtype=np.int64)
    for i in range(lo, hi):
        drive[i, 0] = 0.0
        drive[i, 1] = 0.0
        rep[i, 0] = 0.0
        rep[i, 1] = 0.0
        if state[i] != ACTIVE:
            continue
        fx, fy, bad = _driving(i, pos, vel, region, mass, v0, tau, speed_factor,
                               kinds, kind_off, rw, rh, cs, vecs)
        drive[i, 0] = fx
        drive[i, 1] = fy
        if bad:
            anomalies[i, AN_FIELD] += 1
        reg = region[i]
        cx = min(max(int(math.floor(pos[i, 0] / hash_cell)), 0), hx - 1)
        cy = min(max(int(math.floor(pos[i, 1] / hash_cell)), 0), hy - 1)
        nc = 0
        for gy in range(max(cy - 1, 0), min(cy + 2, hy)):
            for gx in range(max(cx - 1, 0), min(cx + 2, hx)):
                key = (reg * hy + gy) * hx + gx
                a = np.searchsorted(keys_sorted, key)
                while a < n_sorted and keys_sorted[a] == key:
                    cand[nc] = order[a]
                    nc += 1
                    a += 1
        nb = np.sort(cand[:nc])
        sx = 0.0
        sy = 0.0
        for m in range(nc):
            j = nb[m]
            if j == i:
                continue
            ddx = pos[i, 0] - pos[j, 0]
            ddy = pos[i, 1] - pos[j, 1]
            if math.sqrt(ddx * ddx + ddy * ddy) > cutoff:
                continue
            gx_, gy_, co = pair_force(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radius[i], ids[i],
                                      pos[j, 0], pos[j, 1], vel[j, 0], vel[j, 1], radius[j], ids[j],
                                      A, B, k, kappa)
            sx += gx_
            sy += gy_
            if co:
                anomalies[i, AN_COINCIDENT] += 1
        wx, wy, inside = wall_force(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radius[i],
                                    kinds[kind_off[reg]:], rw[reg], rh[reg], cs,
                                    segs, seg_off[reg], seg_off[reg + 1], A, B, k, kappa, cutoff)
        if inside:
            anomalies[i, AN_INSIDE_OBSTACLE] += 1
        rep[i, 0] = sx + wx
        rep[i, 1] = sy + wy


@numba.njit(cache=True, nogil=True)
def compute_forces_brute(pos, vel, region, state, ids, mass, v0, tau, radius, speed_factor,
                         kinds, kind_off, rw, rh, cs, vecs, segs, seg_off,
                         A, B, k, kappa, cutoff, drive, rep, anomalies):
    """All-pairs reference for :func:`compute_forces` (same summation order)."""
    n = pos.shape[0]
    for i in range(n):
        drive[i, 0] = 0.0
        drive[i, 1] = 0.0
        rep[i, 0] = 0.0
        rep[i, 1] = 0.0
        if state[i] != ACTIVE:
            continue
        fx, fy, bad = _driving(i, pos, vel, region, mass, v0, tau, speed_factor,
                               kinds, kind_off, rw, rh, cs, vecs)
        drive[i, 0] = fx
        drive[i, 1] = fy
        if bad:
            anomalies[i, AN_FIELD] += 1
        reg = region[i]
        sx = 0.0
        sy = 0.0
        for j in range(n):
            if j == i or state[j] != ACTIVE or region[j] != reg:
                continue
            ddx = pos[i, 0] - pos[j, 0]
            ddy = pos[i, 1] - pos[j, 1]
            if math.sqrt(ddx * ddx + ddy * ddy) > cutoff:
                continue
            gx_, gy_, co = pair_force(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radius[i], ids[i],
                                      pos[j, 0], pos[j, 1], vel[j, 0], vel[j, 1], radius[j], ids[j],
                                      A, B, k, kappa)
            sx += gx_
            sy += gy_
            if co:
                anomalies[i, AN_COINCIDENT] += 1
        wx, wy, inside = wall_force(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radius[i],
                                    kinds[kind_off[reg]:], rw[reg], rh[reg], cs,
                                    segs, seg_off[reg], seg_off[reg + 1], A, B, k, kappa, cutoff)
        if inside:
            anomalies[i, AN_INSIDE_OBSTACLE] += 1
        rep[i, 0] = sx + wx
        rep[i, 1] = sy + wy


@numba.njit(cache=True, nogil=True)
def integrate(pos, vel, region, state, mass, v0, speed_factor, drive, rep, dt, clamp_factor,
              kinds, kind_off, rw, rh, cs, handoff, anomalies):
    """Semi-implicit Euler with a speed clamp; flags agents standing in a hand-off cell.

    Agents that start the step inside a hand-off cell are waiting on a
    blocked transfer and are held in place at rest.
    """
    n = pos.shape[0]
    for i in range(n):
        handoff[i] = False
        if state[i] != ACTIVE:
            continue
        reg = region[i]
        w = rw[reg]
        ix = int(math.floor(pos[i, 0] / cs))
        iy = int(math.floor(pos[i, 1] / cs))
        kd = kinds[kind_off[reg] + iy * w + ix]
        if kd == 2 or kd == 3:
            # already waiting at a port: hold still until the hand-off succeeds
            vel[i, 0] = 0.0
            vel[i, 1] = 0.0
            handoff[i] = True
            continue
        m = mass[i]
        vx = vel[i, 0] + (drive[i, 0] + rep[i, 0]) / m * dt
        vy = vel[i, 1] + (drive[i, 1] + rep[i, 1]) / m * dt
        vmax = clamp_factor * v0[i] * speed_factor[region[i]]
        sp = math.sqrt(vx * vx + vy * vy)
        if sp > vmax:
            if sp > 0.0:
                scale = vmax / sp
                vx *= scale
                vy *= scale
            anomalies[i, AN_SPEED_CLAMP] += 1
        vel[i, 0] = vx
        vel[i, 1] = vy
        x = pos[i, 0] + vx * dt
        y = pos[i, 1] + vy * dt
        h = rh[reg]
        lim_x = w * cs
        lim_y = h * cs
        if x < 0.0 or y < 0.0 or x >= lim_x or y >= lim_y:
            anomalies[i, AN_OUT_OF_BOUNDS] += 1
            x = min(max(x, 0.0), lim_x * (1.0 - 1e-12))
            y = min(max(y, 0.0), lim_y * (1.0 - 1e-12))
        pos[i, 0] = x
        pos[i, 1] = y
        ix = int(math.floor(x / cs))
        iy = int(math.floor(y / cs))
        kd = kinds[kind_off[reg] + iy * w + ix]
        if kd == 2 or kd == 3:
            handoff[i] = True
