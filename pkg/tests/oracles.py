"""Reference computations written independently of the package code.

Each one recomputes a quantity the slow, obvious way so that tests can
compare against it.
"""

from __future__ import annotations

import heapq
import math

import numpy as np


def slab_layer_count(d0, d_per, lay_max=8):
    """Count the near layer [0, d0) plus every 2*d0 slab that starts before d_per."""
    n = 1
    start = d0
    while start + 2 * d0 <= d_per + 1e-12:
        n += 1
        start += 2 * d0
    # a slab that starts inside the range but would end past it is not counted
    return max(1, min(n, lay_max))


def zone_weight(d_per, d_k, theta, beta, sigma=1.0, mu=0.0):
    gauss = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    return (d_per - d_k) / d_per * gauss * math.exp(-((theta - mu) ** 2 + (beta - mu) ** 2) / (4.0 * sigma**2))


def eci_sum(occ, w):
    num = 0.0
    den = 0.0
    for o, x in zip(np.ravel(occ), np.ravel(w)):
        num += float(x) * (1.0 if o else 0.0)
        den += float(x)
    return num / den if den > 0 else 0.0


def config_load(f_per, f_col, f_dif, c_per, c_plan, c_col, c_dif, c_l):
    return f_per * c_per + c_plan / c_l + f_col * c_col + f_dif * c_dif


def constraints_hold(f, ctx, tol=1e-9):
    """Re-evaluate the four admissibility constraints from the raw context.

    ``f`` is (f_per, f_col, f_dif); ``ctx`` holds c_l, f_sen, the four WCETs,
    n_cores, u_cur, u_total and the previous configuration ``old`` (or None).
    """
    f_per, f_col, f_dif = f
    c = ctx
    slack = tol * max(1.0, c["n_cores"])
    box = (1.0 / c["c_l"]) * (1 - tol) <= f_per <= c["f_sen"] * (1 + tol)
    box &= -tol <= f_col <= f_per * (1 + tol) + tol
    box &= -tol <= f_dif <= c["f_sen"] * (1 + tol)
    load = config_load(f_per, f_col, f_dif, c["c_per"], c["c_plan"], c["c_col"], c["c_dif"], c["c_l"])
    budget = load <= c["n_cores"] + slack
    old = c.get("old")
    old_load = 0.0 if old is None else config_load(*old, c["c_per"], c["c_plan"], c["c_col"], c["c_dif"], c["c_l"])
    util = c["u_cur"] + (load - old_load) <= c["u_total"] + slack
    return bool(box and budget and util)


def any_feasible_on_grid(ctx, n=21):
    """Exhaustive scan of an n^3 grid over the frequency box (corners
    included) for any point meeting all four constraints."""
    lo = 1.0 / ctx["c_l"]
    hi = ctx["f_sen"]
    if lo > hi * (1 + 1e-9):
        return False
    fp, fc, fd = np.meshgrid(np.linspace(lo, hi, n), np.linspace(0.0, hi, n), np.linspace(0.0, hi, n),
                             indexing="ij")
    c = ctx
    load = fp * c["c_per"] + c["c_plan"] / c["c_l"] + fc * c["c_col"] + fd * c["c_dif"]
    old = c.get("old")
    old_load = 0.0 if old is None else config_load(*old, c["c_per"], c["c_plan"], c["c_col"], c["c_dif"], c["c_l"])
    slack = 1e-9 * max(1.0, c["n_cores"])
    ok = (fc <= fp) & (load <= c["n_cores"] + slack) & (c["u_cur"] + load - old_load <= c["u_total"] + slack)
    return bool(ok.any())


def octile_shortest(blocked, start, goal):
    """Dijkstra on an 8-connected grid, forbidding diagonal corner cutting.
    Returns the path length in cells, or inf."""
    h, w = blocked.shape
    dist = np.full((h, w), np.inf)
    dist[start] = 0.0
    pq = [(0.0, start)]
    steps = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
             (-1, -1, math.sqrt(2)), (-1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)), (1, 1, math.sqrt(2))]
    while pq:
        d, (i, j) = heapq.heappop(pq)
        if (i, j) == goal:
            return d
        if d > dist[i, j]:
            continue
        for di, dj, c in steps:
            a, b = i + di, j + dj
            if not (0 <= a < h and 0 <= b < w) or blocked[a, b]:
                continue
            if di and dj and (blocked[i + di, j] or blocked[i, j + dj]):
                continue
            nd = d + c
            if nd < dist[a, b]:
                dist[a, b] = nd
                heapq.heappush(pq, (nd, (a, b)))
    return math.inf


def two_pass_std(x):
    x = [float(v) for v in x]
    n = len(x)
    if n == 0:
        return 0.0
    mean = sum(x) / n
    return math.sqrt(sum((v - mean) ** 2 for v in x) / n)
