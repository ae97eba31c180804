"""Grid path search, string pulling and trapezoidal speed profiles.

Planning happens on the horizontal slice of the voxel map around the flight
altitude: a column is blocked when any cell of the altitude band is
occupied, and blocked columns are inflated by one cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from adaptnav import _kernels
from adaptnav.mapping import OCCUPIED, UNKNOWN, OccupancyMap

Z_BAND = 0.3
UNKNOWN_SPEED_FACTOR = 0.5


class NoPathError(RuntimeError):
    """The current map offers no route between start and goal."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    waypoints: np.ndarray  # (k, 3)
    v_profile: np.ndarray  # (k-1,) speed limit per segment
    a_max: float

    def __post_init__(self):
        seg = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)
        object.__setattr__(self, "seg_lengths", seg)
        object.__setattr__(self, "cum", np.concatenate([[0.0], np.cumsum(seg)]))

    @property
    def total_length(self) -> float:
        return float(self.cum[-1])

    @property
    def duration(self) -> float:
        """C_L: sum of segment length over segment speed."""
        if len(self.seg_lengths) == 0:
            return 0.0
        return float(np.sum(self.seg_lengths / self.v_profile))

    def segment_at(self, s: float) -> int:
        if len(self.seg_lengths) == 0:
            return 0
        i = int(np.searchsorted(self.cum, s, side="right") - 1)
        return min(max(i, 0), len(self.seg_lengths) - 1)

    def point_at(self, s: float) -> np.ndarray:
        if len(self.seg_lengths) == 0:
            return self.waypoints[0].copy()
        s = min(max(s, 0.0), self.total_length)
        i = self.segment_at(s)
        L = self.seg_lengths[i]
        f = 0.0 if L == 0 else (s - self.cum[i]) / L
        return self.waypoints[i] + f * (self.waypoints[i + 1] - self.waypoints[i])

    def tangent_at(self, s: float) -> np.ndarray:
        if len(self.seg_lengths) == 0:
            return np.zeros(3)
        i = self.segment_at(s)
        d = self.waypoints[i + 1] - self.waypoints[i]
        n = np.linalg.norm(d)
        return d / n if n > 0 else np.zeros(3)

    def speed_limit_at(self, s: float) -> float:
        if len(self.v_profile) == 0:
            return 0.0
        return float(self.v_profile[self.segment_at(s)])


def inflation_cells(res: float) -> int:
    """Cells of clearance added around occupied columns (one at every cell size)."""
    return 1


class PlanningGrid:
    """2D blocked/unknown masks of a map at one altitude band, with inflation.

    """

    def __init__(self, occ_map: OccupancyMap | None, z: float = 0.0, band: float = Z_BAND,
                 inflate: int | None = None, *, columns=None):
        if columns is not None:
            occupied, unknown, res, origin = columns
            self.map = None
        else:
            self.map = occ_map
            res = occ_map.res
            origin = occ_map.origin[:2]
            k0 = int(math.floor((z - band - occ_map.origin[2]) / occ_map.res))
            k1 = int(math.floor((z + band - occ_map.origin[2]) / occ_map.res))
            k0 = min(max(k0, 0), occ_map.dims[2] - 1)
            k1 = min(max(k1, k0), occ_map.dims[2] - 1)
            occupied, unknown = _kernels.band_project(occ_map.cells, k0, k1, OCCUPIED, UNKNOWN)
        self.res = float(res)
        self.origin = np.asarray(origin, dtype=float)
        self.occupied = occupied
        self.unknown = unknown
        self.inflate = inflation_cells(self.res) if inflate is None else inflate
        if self.inflate > 0 and self.occupied.any():
            # k iterations of a 3x3 dilation equal one square max filter of side 2k+1
            self.blocked = ndimage.maximum_filter(self.occupied, size=2 * self.inflate + 1, mode="constant")
        else:
            self.blocked = self.occupied.copy()

    def coarsened(self, res: float, inflate: int | None = None) -> "PlanningGrid":
        """Same band at an integer multiple of the cell size: a coarse column is
        occupied if any fine column is, unknown only if all are."""
        k = int(round(res / self.res))
        if k < 1 or not math.isclose(res / self.res, k, rel_tol=1e-9):
            raise ValueError("coarse cell size must be an integer multiple of the fine one")
        if k == 1:
            return self if inflate is None or inflate == self.inflate else PlanningGrid(
                None, inflate=inflate, columns=(self.occupied, self.unknown, self.res, self.origin))
        nx, ny = self.occupied.shape
        cx, cy = -(-nx // k), -(-ny // k)
        occ = np.zeros((cx * k, cy * k), bool)
        occ[:nx, :ny] = self.occupied
        unk = np.ones((cx * k, cy * k), bool)
        unk[:nx, :ny] = self.unknown
        occ = occ.reshape(cx, k, cy, k).any(axis=(1, 3))
        unk = unk.reshape(cx, k, cy, k).all(axis=(1, 3))
        return PlanningGrid(None, inflate=inflate, columns=(occ, unk, res, self.origin))

    def to_cell(self, p):
        return (p[:2] - self.origin) / self.res

    def cell_index(self, p):
        c = np.floor(self.to_cell(np.asarray(p, dtype=float)) + 1e-9).astype(int)
        return int(c[0]), int(c[1])

    def inside(self, ij):
        return 0 <= ij[0] < self.blocked.shape[0] and 0 <= ij[1] < self.blocked.shape[1]

    def passable(self, si, gi):
        """Blocked mask with inflation removed around the vehicle cell ``si`` and
        at the goal cell ``gi`` (occupied cells stay blocked)."""
        blocked = self.blocked.copy()
        i0, i1 = max(si[0] - 1, 0), min(si[0] + 2, blocked.shape[0])
        j0, j1 = max(si[1] - 1, 0), min(si[1] + 2, blocked.shape[1])
        blocked[i0:i1, j0:j1] &= self.occupied[i0:i1, j0:j1]
        blocked[si] = False
        if self.inside(gi) and not self.occupied[gi]:
            blocked[gi] = False
        return blocked

    def segment_free(self, a, b, blocked=None) -> bool:
        blocked = self.blocked if blocked is None else blocked
        ca = self.to_cell(np.asarray(a, dtype=float))
        cb = self.to_cell(np.asarray(b, dtype=float))
        return bool(_kernels.line_free(blocked, ca[0], ca[1], cb[0], cb[1]))


def _near_unknown(grid: PlanningGrid) -> np.ndarray:
    return ndimage.binary_dilation(grid.unknown & ~grid.blocked, structure=np.ones((3, 3), bool))


def _segment_speeds(grid: PlanningGrid, pts, v_max, sense_range, factor, chunk=1.0):
    """Split the polyline into pieces of at most ``chunk`` metres; pieces within
    sensing range that pass next to unknown columns fly at ``factor * v_max``.
    Consecutive collinear pieces with the same speed are merged again."""
    if factor >= 1.0:
        return pts, np.full(len(pts) - 1, v_max, dtype=float)
    near_unknown = _near_unknown(grid)
    origin = pts[0]
    out_pts = [pts[0]]
    out_v = []
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / chunk - 1e-9)))
        for k in range(n):
            p0 = a + (b - a) * (k / n)
            p1 = a + (b - a) * ((k + 1) / n)
            v = v_max
            if np.linalg.norm(p0[:2] - origin[:2]) <= sense_range and not grid.segment_free(p0, p1, near_unknown):
                v = v_max * factor
            if k > 0 and out_v and out_v[-1] == v:
                out_pts[-1] = p1  # same segment, same speed: extend
            else:
                out_pts.append(p1)
                out_v.append(v)
    return np.array(out_pts), np.array(out_v, dtype=float)


def plan_trajectory(occ_map: OccupancyMap, start, goal, v_max: float, a_max: float,
                    grid: PlanningGrid | None = None, sense_range: float = 10.0,
                    unknown_factor: float = UNKNOWN_SPEED_FACTOR) -> Trajectory:
    """Shortest collision-free route on the inflated slice, string-pulled.

    Unknown space is traversable. Raises NoPathError if the goal cannot be
    reached through the current map.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if grid is None:
        grid = PlanningGrid(occ_map, start[2])
    si = grid.cell_index(start)
    gi = grid.cell_index(goal)
    if not grid.inside(si) or not grid.inside(gi):
        raise NoPathError("start or goal outside the map")
    if grid.occupied[gi]:
        raise NoPathError("goal cell occupied")
    blocked = grid.passable(si, gi)
    if _kernels.line_free(blocked, *grid.to_cell(start), *grid.to_cell(goal)):
        pts = np.array([start, goal])
    else:
        cells = _kernels.astar_grid(blocked, si[0], si[1], gi[0], gi[1])
        if len(cells) == 0:
            raise NoPathError("goal unreachable")
        centers = grid.origin + (cells + 0.5) * grid.res
        chain = [start[:2]] + [c for c in centers[1:-1]] + [goal[:2]]
        pts2 = _string_pull(blocked, grid, chain)
        z = np.linspace(start[2], goal[2], len(pts2))
        pts = np.column_stack([np.array(pts2), z])
    pts, speeds = _segment_speeds(grid, pts, v_max, sense_range, unknown_factor)
    return Trajectory(pts, speeds, a_max)


def _string_pull(blocked, grid, chain):
    cells = (np.asarray(chain) - grid.origin) / grid.res
    keep = _kernels.string_pull(blocked, cells)
    return [chain[k] for k in keep]


def collision_check(occ_map: OccupancyMap, traj: Trajectory, from_arc: float,
                    grid: PlanningGrid | None = None, skip: float | None = None) -> bool:
    """True (COLLIDING) when the untraversed part of ``traj`` crosses an inflated
    occupied column. The first ``skip`` metres ahead (default: one and a half
    cells) are ignored so the vehicle's own neighbourhood cannot self-trigger."""
    if traj is None or traj.total_length <= 0:
        return False
    if grid is None:
        grid = PlanningGrid(occ_map, float(traj.waypoints[0][2]))
    if skip is None:
        skip = 1.5 * grid.res
    s0 = from_arc + skip
    if s0 >= traj.total_length:
        return False
    pts = [traj.point_at(s0)]
    i = traj.segment_at(s0)
    pts += [traj.waypoints[k] for k in range(i + 1, len(traj.waypoints))]
    blocked = grid.blocked
    gi = grid.cell_index(traj.waypoints[-1])
    if grid.inside(gi) and blocked[gi] and not grid.occupied[gi]:
        blocked = blocked.copy()
        blocked[gi] = False
    for a, b in zip(pts[:-1], pts[1:]):
        if not grid.segment_free(a, b, blocked):
            return True
    return False


def slowdown_stale(traj: Trajectory, from_arc: float, grid: PlanningGrid) -> bool:
    """True when a slowed segment still ahead no longer passes next to unknown
    space, i.e. the speed profile was set by a map that has since filled in."""
    if traj is None or traj.total_length <= 0:
        return False
    v_top = float(traj.v_profile.max())
    near_unknown = None
    for i in range(traj.segment_at(from_arc), len(traj.seg_lengths)):
        if traj.v_profile[i] >= v_top:
            continue
        if near_unknown is None:
            near_unknown = _near_unknown(grid)
        a = traj.point_at(max(from_arc, traj.cum[i]))
        if grid.segment_free(a, traj.waypoints[i + 1], near_unknown):
            return True
    return False
