"""Ternary voxel occupancy map built from depth frames."""

from __future__ import annotations

import math

import numpy as np

from adaptnav import _kernels
from adaptnav.scenario import CameraModel, DepthFrame, world_rays

FREE = int(_kernels.FREE)
UNKNOWN = int(_kernels.UNKNOWN)
OCCUPIED = int(_kernels.OCCUPIED)


class OccupancyMap:
    """Dense voxel grid over an axis-aligned region.

    Cells hold FREE < UNKNOWN < OCCUPIED, an order chosen so that a max over
    a block is the conservative summary of that block. ``version`` increases
    on every write.
    """

    def __init__(self, res, origin, dims, cells=None):
        self.res = float(res)
        self.origin = np.asarray(origin, dtype=float)
        self.dims = tuple(int(d) for d in dims)
        if cells is None:
            cells = np.full(self.dims, UNKNOWN, dtype=np.int8)
        self.cells = cells
        self.version = 0

    @classmethod
    def empty(cls, lo, hi, res):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        dims = np.maximum(1, np.ceil((hi - lo) / res - 1e-9).astype(int))
        return cls(res, lo, dims)

    @property
    def upper(self):
        return self.origin + np.asarray(self.dims) * self.res

    def copy(self):
        m = OccupancyMap(self.res, self.origin.copy(), self.dims, self.cells.copy())
        m.version = self.version
        return m

    def index(self, p):
        return tuple(np.floor((np.asarray(p) - self.origin) / self.res + 1e-9).astype(int))

    def contains_index(self, idx):
        return all(0 <= idx[i] < self.dims[i] for i in range(3))

    def state(self, p):
        idx = self.index(p)
        if not self.contains_index(idx):
            return UNKNOWN
        return int(self.cells[idx])

    def occupied_count(self) -> int:
        return int((self.cells == OCCUPIED).sum())

    def occupied_boxes(self):
        """(lo, hi) corners of every occupied cell, shape (n, 2, 3)."""
        idx = np.argwhere(self.cells == OCCUPIED)
        lo = self.origin + idx * self.res
        return np.stack([lo, lo + self.res], axis=1)

    def regrid(self, res) -> "OccupancyMap":
        """Re-sample onto a new cell size over the same region.

        Each new cell takes the max state of every old cell it overlaps, so
        any occupied volume stays covered.
        """
        res = float(res)
        if math.isclose(res, self.res, rel_tol=1e-12):
            return self
        new = OccupancyMap.empty(self.origin, self.upper, res)
        ratio = res / self.res
        k = int(round(ratio))
        if k > 1 and math.isclose(ratio, k, rel_tol=1e-9):
            # block max over k^3 cells, padding the tail with FREE (the lowest state)
            pad = [(0, d * k - s) for d, s in zip(new.dims, self.dims)]
            if all(p[1] >= 0 for p in pad):
                data = np.pad(self.cells, pad, constant_values=FREE)
                d0, d1, d2 = new.dims
                new.cells = data.reshape(d0, k, d1, k, d2, k).max(axis=(1, 3, 5))
                new.version = self.version + 1
                return new
        data = self.cells
        for axis in range(3):
            n_new = new.dims[axis]
            out_shape = list(data.shape)
            out_shape[axis] = n_new
            out = np.empty(out_shape, dtype=np.int8)
            n_old = data.shape[axis]
            for i in range(n_new):
                a = int(math.floor(i * res / self.res + 1e-9))
                b = int(math.ceil((i + 1) * res / self.res - 1e-9))
                a = min(max(a, 0), n_old - 1)
                b = min(max(b, a + 1), n_old)
                src = np.take(data, np.arange(a, b), axis=axis).max(axis=axis)
                sl = [slice(None)] * 3
                sl[axis] = i
                out[tuple(sl)] = src
            data = out
        new.cells = data
        new.version = self.version + 1
        return new


def update_map(occ_map: OccupancyMap, frame: DepthFrame, cam: CameraModel, res=None) -> OccupancyMap:
    """Integrate one frame; re-grid first if ``res`` differs from the map's.

    Returns the map that now holds the data (the argument itself unless a
    re-grid happened).
    """
    if res is not None and not math.isclose(res, occ_map.res, rel_tol=1e-12):
        occ_map = occ_map.regrid(res)
    dirs = world_rays(frame.pose, cam)
    _kernels.integrate_rays(
        occ_map.cells,
        occ_map.origin,
        occ_map.res,
        np.asarray(frame.pose.position, dtype=float),
        dirs,
        frame.ranges.ravel(),
        cam.d_per,
    )
    occ_map.version += 1
    return occ_map
