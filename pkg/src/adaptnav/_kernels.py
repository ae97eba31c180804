"""Compiled inner loops: ray casting, ray marching into voxel grids, grid A*.

Everything here works on plain arrays so that the public modules can stay
readable numpy code.
"""

import math

import numpy as np
from numba import njit

FREE = np.int8(0)
UNKNOWN = np.int8(1)
OCCUPIED = np.int8(2)

_INF = np.inf


@njit(cache=True)
def _ray_box(ox, oy, oz, dx, dy, dz, lo, hi):
    t0 = -_INF
    t1 = _INF
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    for ax in range(3):
        if abs(d[ax]) < 1e-15:
            if o[ax] < lo[ax] or o[ax] > hi[ax]:
                return _INF
            continue
        inv = 1.0 / d[ax]
        ta = (lo[ax] - o[ax]) * inv
        tb = (hi[ax] - o[ax]) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return _INF
    if t1 < 0.0:
        return _INF
    if t0 < 0.0:
        return 0.0
    return t0


@njit(cache=True)
def _ray_cylinder(ox, oy, oz, dx, dy, dz, cx, cy, r, z0, z1):
    # vertical extent
    if abs(dz) < 1e-15:
        if oz < z0 or oz > z1:
            return _INF
        tz0 = -_INF
        tz1 = _INF
    else:
        ta = (z0 - oz) / dz
        tb = (z1 - oz) / dz
        if ta > tb:
            ta, tb = tb, ta
        tz0 = ta
        tz1 = tb
    # radial extent
    px = ox - cx
    py = oy - cy
    a = dx * dx + dy * dy
    c = px * px + py * py - r * r
    if a < 1e-15:
        if c > 0.0:
            return _INF
        tc0 = -_INF
        tc1 = _INF
    else:
        b = px * dx + py * dy
        disc = b * b - a * c
        if disc < 0.0:
            return _INF
        sq = math.sqrt(disc)
        tc0 = (-b - sq) / a
        tc1 = (-b + sq) / a
    t0 = max(tz0, tc0)
    t1 = min(tz1, tc1)
    if t0 > t1 or t1 < 0.0:
        return _INF
    if t0 < 0.0:
        return 0.0
    return t0


@njit(cache=True)
def cast_rays(origin, dirs, boxes, cylinders, max_range, inside_range):
    """Distance along each unit ray to the first obstacle, clamped to max_range.

    boxes: (nb, 6) lo/hi corners. cylinders: (nc, 5) x, y, radius, z0, z1.
    A ray starting inside an obstacle reports ``inside_range``.
    """
    n = dirs.shape[0]
    out = np.empty(n)
    ox, oy, oz = origin[0], origin[1], origin[2]
    for i in range(n):
        dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        best = max_range
        for j in range(boxes.shape[0]):
            t = _ray_box(ox, oy, oz, dx, dy, dz, boxes[j, 0:3], boxes[j, 3:6])
            if t < best:
                best = t
        for j in range(cylinders.shape[0]):
            t = _ray_cylinder(ox, oy, oz, dx, dy, dz, cylinders[j, 0], cylinders[j, 1],
                              cylinders[j, 2], cylinders[j, 3], cylinders[j, 4])
            if t < best:
                best = t
        if best <= 0.0:
            best = inside_range
        out[i] = best
    return out


@njit(cache=True)
def _cell(p, origin, res, dims, idx):
    for ax in range(3):
        k = math.floor((p[ax] - origin[ax]) / res + 1e-9)
        if k < 0 or k >= dims[ax]:
            return False
        idx[ax] = k
    return True


@njit(cache=True)
def _dda_axis(d, g, c):
    """Step sign, first boundary crossing and crossing interval along one axis."""
    if d > 1e-15:
        return 1, (c + 1 - g) / d, 1.0 / d
    if d < -1e-15:
        return -1, (g - c) / -d, -1.0 / d
    return 0, _INF, _INF


@njit(cache=True)
def band_project(cells, k0, k1, occupied_state, unknown_state):
    """Column summary of the z slab k0..k1: any occupied, all unknown."""
    nx, ny, _ = cells.shape
    occ = np.zeros((nx, ny), dtype=np.bool_)
    unk = np.zeros((nx, ny), dtype=np.bool_)
    for i in range(nx):
        for j in range(ny):
            o = False
            u = True
            for k in range(k0, k1 + 1):
                v = cells[i, j, k]
                if v == occupied_state:
                    o = True
                if v != unknown_state:
                    u = False
            occ[i, j] = o
            unk[i, j] = u
    return occ, unk


@njit(cache=True)
def integrate_rays(cells, origin, res, origin_pt, dirs, ranges, max_range):
    """Inverse-sensor update: cells a ray passes before its hit become FREE,
    the hit cell OCCUPIED. Rays are walked cell by cell (voxel traversal).

    All free-space marks of the frame are applied before any hit so that a
    cell containing an obstacle surface is never cleared by a grazing ray of
    the same frame.
    """
    nx, ny, nz = cells.shape
    dims = np.array(cells.shape)
    idx = np.zeros(3, dtype=np.int64)
    p = np.empty(3)
    n = dirs.shape[0]
    gx = (origin_pt[0] - origin[0]) / res
    gy = (origin_pt[1] - origin[1]) / res
    gz = (origin_pt[2] - origin[2]) / res
    for i in range(n):
        r = ranges[i] / res - 1e-6
        if r <= 0.0:
            continue
        ci = int(math.floor(gx))
        cj = int(math.floor(gy))
        ck = int(math.floor(gz))
        si, tmi, tdi = _dda_axis(dirs[i, 0], gx, ci)
        sj, tmj, tdj = _dda_axis(dirs[i, 1], gy, cj)
        sk, tmk, tdk = _dda_axis(dirs[i, 2], gz, ck)
        t = 0.0
        while t < r:
            if 0 <= ci < nx and 0 <= cj < ny and 0 <= ck < nz:
                cells[ci, cj, ck] = FREE
            elif (si > 0 and ci >= nx) or (si < 0 and ci < 0) or (sj > 0 and cj >= ny) or (sj < 0 and cj < 0) \
                    or (sk > 0 and ck >= nz) or (sk < 0 and ck < 0):
                break  # left the grid for good
            if tmi <= tmj and tmi <= tmk:
                t = tmi
                ci += si
                tmi += tdi
            elif tmj <= tmk:
                t = tmj
                cj += sj
                tmj += tdj
            else:
                t = tmk
                ck += sk
                tmk += tdk
    for i in range(n):
        r = ranges[i]
        if r >= max_range - 1e-9:
            continue
        for ax in range(3):
            p[ax] = origin_pt[ax] + dirs[i, ax] * r
        if _cell(p, origin, res, dims, idx):
            cells[idx[0], idx[1], idx[2]] = OCCUPIED


@njit(cache=True)
def line_free(blocked, x0, y0, x1, y1):
    """True when the segment between two continuous grid coordinates (in cell
    units) crosses no blocked cell. Sampled at quarter-cell spacing."""
    nx, ny = blocked.shape
    dx = x1 - x0
    dy = y1 - y0
    length = math.sqrt(dx * dx + dy * dy)
    n = int(length * 4.0) + 1
    for s in range(n + 1):
        f = s / n
        i = int(math.floor(x0 + f * dx))
        j = int(math.floor(y0 + f * dy))
        if i < 0 or j < 0 or i >= nx or j >= ny:
            return False
        if blocked[i, j]:
            return False
    return True


@njit(cache=True)
def astar_grid(blocked, si, sj, gi, gj):
    """8-connected A* with octile heuristic. Returns a (k, 2) cell path or an
    empty array when the goal cannot be reached. Diagonal moves may not cut
    blocked corners."""
    nx, ny = blocked.shape
    n = nx * ny
    g = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    # binary heap of (f, tie, node)
    cap = 1024
    hf = np.empty(cap)
    ht = np.empty(cap, dtype=np.int64)
    hn = np.empty(cap, dtype=np.int64)
    size = 0
    counter = 0
    sqrt2 = math.sqrt(2.0)
    start = si * ny + sj
    goal = gi * ny + gj
    g[start] = 0.0

    # push start
    ddx = abs(si - gi)
    ddy = abs(sj - gj)
    hf[0] = (max(ddx, ddy) - min(ddx, ddy)) + sqrt2 * min(ddx, ddy)
    ht[0] = 0
    hn[0] = start
    size = 1
    while size > 0:
        # pop
        node = hn[0]
        size -= 1
        if size > 0:
            lf = hf[size]
            lt = ht[size]
            ln = hn[size]
            pos = 0
            while True:
                c = 2 * pos + 1
                if c >= size:
                    break
                if c + 1 < size and (hf[c + 1] < hf[c] or (hf[c + 1] == hf[c] and ht[c + 1] < ht[c])):
                    c += 1
                if hf[c] < lf or (hf[c] == lf and ht[c] < lt):
                    hf[pos] = hf[c]
                    ht[pos] = ht[c]
                    hn[pos] = hn[c]
                    pos = c
                else:
                    break
            hf[pos] = lf
            ht[pos] = lt
            hn[pos] = ln
        if closed[node]:
            continue
        closed[node] = True
        if node == goal:
            break
        ci = node // ny
        cj = node % ny
        for di in range(-1, 2):
            for dj in range(-1, 2):
                if di == 0 and dj == 0:
                    continue
                ni = ci + di
                nj = cj + dj
                if ni < 0 or nj < 0 or ni >= nx or nj >= ny:
                    continue
                if blocked[ni, nj]:
                    continue
                if di != 0 and dj != 0:
                    if blocked[ci + di, cj] or blocked[ci, cj + dj]:
                        continue
                    cost = sqrt2
                else:
                    cost = 1.0
                nb = ni * ny + nj
                if closed[nb]:
                    continue
                ng = g[node] + cost
                if ng < g[nb]:
                    g[nb] = ng
                    parent[nb] = node
                    ddx = abs(ni - gi)
                    ddy = abs(nj - gj)
                    h = (max(ddx, ddy) - min(ddx, ddy)) + sqrt2 * min(ddx, ddy)
                    if size == cap:
                        cap *= 2
                        hf2 = np.empty(cap)
                        ht2 = np.empty(cap, dtype=np.int64)
                        hn2 = np.empty(cap, dtype=np.int64)
                        hf2[:size] = hf[:size]
                        ht2[:size] = ht[:size]
                        hn2[:size] = hn[:size]
                        hf = hf2
                        ht = ht2
                        hn = hn2
                    counter += 1
                    pos = size
                    size += 1
                    fval = ng + h
                    while pos > 0:
                        par = (pos - 1) // 2
                        if hf[par] > fval or (hf[par] == fval and ht[par] > counter):
                            hf[pos] = hf[par]
                            ht[pos] = ht[par]
                            hn[pos] = hn[par]
                            pos = par
                        else:
                            break
                    hf[pos] = fval
                    ht[pos] = counter
                    hn[pos] = nb
    if not closed[goal]:
        return np.empty((0, 2), dtype=np.int64)
    k = 0
    node = goal
    while node != -1:
        k += 1
        node = parent[node]
    path = np.empty((k, 2), dtype=np.int64)
    node = goal
    for m in range(k - 1, -1, -1):
        path[m, 0] = node // ny
        path[m, 1] = node % ny
        node = parent[node]
    return path


@njit(cache=True)
def string_pull(blocked, pts):
    """Indices of a shortcut subsequence of ``pts`` (continuous cell
    coordinates) whose consecutive members see each other."""
    n = pts.shape[0]
    keep = [0]
    i = 0
    while i < n - 1:
        j = i + 1
        # gallop forward while the line stays free, then keep the farthest hit
        k = j + 1
        while k < n and line_free(blocked, pts[i, 0], pts[i, 1], pts[k, 0], pts[k, 1]):
            j = k
            k += 1
        keep.append(j)
        i = j
    return np.array(keep)
