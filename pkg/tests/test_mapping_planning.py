import math

import numpy as np
import pytest
from conftest import wall_world
from oracles import octile_shortest

from adaptnav.mapping import FREE, OCCUPIED, UNKNOWN, OccupancyMap, update_map
from adaptnav.planning import NoPathError, PlanningGrid, collision_check, plan_trajectory
from adaptnav.scenario import Pose, World, render_depth_frame

Z = 1.5


def _flat_map(nx, ny, res=0.1, fill=FREE):
    m = OccupancyMap(res, (0.0, 0.0, 0.0), (nx, ny, int(round(3.0 / res))))
    m.cells[...] = fill
    return m


def _block(m, x0, x1, y0, y1):
    """Mark the column span [x0,x1) x [y0,y1) occupied at every height."""
    r = m.res
    m.cells[int(round(x0 / r)):int(round(x1 / r)), int(round(y0 / r)):int(round(y1 / r)), :] = OCCUPIED


def test_empty_world_frame_only_frees(cam):
    w = World(((0, -8, 0), (30, 8, 6)), (), (1, 0, 1.5), (29, 0, 1.5))
    m = OccupancyMap.empty(*w.bounds, 0.1)
    update_map(m, render_depth_frame(w, Pose(w.start, 0.0), cam), cam)
    assert m.occupied_count() == 0
    free = np.argwhere(m.cells == FREE)
    assert len(free) > 1000
    centers = m.origin + (free + 0.5) * m.res
    rel = centers - np.array(w.start)
    assert np.all(rel[:, 0] > -m.res)  # nothing behind the camera
    assert np.all(np.linalg.norm(rel, axis=1) <= cam.d_per + 2 * m.res)
    az = np.degrees(np.arctan2(np.abs(rel[:, 1]), rel[:, 0]))
    assert np.all(az[np.linalg.norm(rel[:, :2], axis=1) > 0.5] <= 45 + 6)


def test_wall_frame_marks_a_plane(cam):
    w = wall_world(2.0)
    m = OccupancyMap.empty(*w.bounds, 0.1)
    update_map(m, render_depth_frame(w, Pose(w.start, 0.0), cam), cam)
    occ = np.argwhere(m.cells == OCCUPIED)
    assert len(occ) > 50
    x = m.origin[0] + (occ[:, 0] + 0.5) * m.res
    assert np.all(np.abs(x - 3.0) <= m.res)  # face at x = 3 (start x + 2 m)
    # free cells never lie beyond the wall
    free = np.argwhere(m.cells == FREE)
    assert (m.origin[0] + free[:, 0] * m.res).max() < 3.0


def test_regrid_keeps_single_occupied_cell_covered():
    m = OccupancyMap.empty((0, 0, 0), (4, 4, 2), 0.1)
    m.cells[...] = FREE
    m.cells[17, 23, 9] = OCCUPIED
    c = m.regrid(0.5)
    assert c.res == 0.5
    assert c.cells[3, 4, 1] == OCCUPIED and c.occupied_count() == 1


@pytest.mark.parametrize("coarse", [0.2, 0.3, 0.5, 1.0])
def test_regrid_contains_all_occupied_volume(coarse):
    rng = np.random.default_rng(int(coarse * 10))
    m = OccupancyMap.empty((0, 0, 0), (3.1, 2.7, 1.3), 0.1)
    m.cells[...] = rng.choice([FREE, UNKNOWN, OCCUPIED], size=m.dims, p=[0.7, 0.2, 0.1])
    c = m.regrid(coarse)
    for lo, hi in m.occupied_boxes():
        for p in (lo + 1e-6, hi - 1e-6, (lo + hi) / 2):
            assert c.state(p) == OCCUPIED


def test_open_map_plans_straight_line():
    m = _flat_map(100, 60)
    start, goal = np.array([0.55, 0.55, Z]), np.array([9.35, 5.25, Z])
    t = plan_trajectory(m, start, goal, 2.0, 1.0)
    assert len(t.waypoints) >= 2
    assert t.total_length == pytest.approx(np.linalg.norm(goal - start), rel=1e-12)
    assert np.all(t.v_profile == 2.0)
    assert t.duration == pytest.approx(t.total_length / 2.0)


def test_path_through_single_gap_matches_grid_search():
    m = _flat_map(100, 100)
    _block(m, 5.0, 5.2, 0.0, 7.0)
    _block(m, 5.0, 5.2, 7.8, 10.0)
    # both legs run at 45 degrees, where 8-connected and any-angle lengths agree
    start, goal = np.array([0.85, 3.05, Z]), np.array([9.35, 3.05, Z])
    grid = PlanningGrid(m, Z)
    t = plan_trajectory(m, start, goal, 2.0, 1.0, grid)
    # the path really threads the gap
    xs = np.linspace(0, t.total_length, 2000)
    pts = np.array([t.point_at(s) for s in xs])
    at_wall = pts[np.abs(pts[:, 0] - 5.1) < 0.05]
    assert np.all((at_wall[:, 1] > 7.0) & (at_wall[:, 1] < 7.8))
    blocked = grid.passable(grid.cell_index(start), grid.cell_index(goal))
    ref = octile_shortest(blocked, grid.cell_index(start), grid.cell_index(goal)) * m.res
    assert abs(t.total_length - ref) <= m.res * math.sqrt(2)


def test_enclosed_goal_has_no_path():
    m = _flat_map(80, 80)
    _block(m, 5.0, 7.0, 5.0, 5.2)
    _block(m, 5.0, 7.0, 6.8, 7.0)
    _block(m, 5.0, 5.2, 5.0, 7.0)
    _block(m, 6.8, 7.0, 5.0, 7.0)
    with pytest.raises(NoPathError):
        plan_trajectory(m, (1.05, 1.05, Z), (6.05, 6.05, Z), 2.0, 1.0)


def test_unknown_neighbourhood_slows_the_profile():
    m = _flat_map(100, 40)
    m.cells[40:60, 21:40, :] = UNKNOWN  # starts one cell beside the path
    t = plan_trajectory(m, (0.55, 2.05, Z), (9.55, 2.05, Z), 2.0, 1.0)
    assert t.v_profile.min() == pytest.approx(1.0) and t.v_profile.max() == 2.0
    assert t.total_length == pytest.approx(9.0)


def test_collision_check_examples():
    m = _flat_map(100, 40)
    t = plan_trajectory(m, (0.55, 2.05, Z), (9.55, 2.05, Z), 2.0, 1.0)
    assert not collision_check(m, t, 0.0)
    ahead = m.copy()
    _block(ahead, 6.0, 6.3, 1.5, 2.5)
    assert collision_check(ahead, t, 1.0)
    behind = m.copy()
    _block(behind, 2.0, 2.3, 1.5, 2.5)
    assert collision_check(behind, t, 0.0)
    assert not collision_check(behind, t, 3.5)


def test_waypoint_chain_clear_of_inflated_obstacles():
    rng = np.random.default_rng(4)
    for _ in range(20):
        m = _flat_map(120, 80)
        for _ in range(12):
            x, y = rng.uniform(2, 10), rng.uniform(0, 8)
            _block(m, round(x, 1), round(x, 1) + 0.5, round(y, 1), round(y, 1) + 0.5)
        grid = PlanningGrid(m, Z)
        start, goal = np.array([0.55, 4.05, Z]), np.array([11.55, 4.05, Z])
        try:
            t = plan_trajectory(m, start, goal, 2.0, 1.0, grid)
        except NoPathError:
            continue
        blocked = grid.passable(grid.cell_index(start), grid.cell_index(goal))
        for a, b in zip(t.waypoints[:-1], t.waypoints[1:]):
            assert grid.segment_free(a, b, blocked)
