import math

import numpy as np
import pytest
from conftest import wall_world
from oracles import eci_sum, slab_layer_count, zone_weight

from adaptnav.eci import (
    EciComputer,
    build_layers,
    compute_eci,
    layer_count,
    nearest_obstacle_distance,
    update_delta,
    write_eci_trace,
    zone_centers,
    zone_occupancy,
    zone_weights,
)
from adaptnav.scenario import CameraModel, DepthFrame, Pose, render_depth_frame


def _frame(ranges, d_per=10.0):
    return DepthFrame(np.asarray(ranges, dtype=float), 0.0, Pose((0, 0, 0)), d_per)


def test_nearest_distance_examples():
    assert nearest_obstacle_distance(_frame(np.full((48, 64), 10.0))) == 10.0
    cam = CameraModel(width=65, height=49)  # a pixel on the optical axis
    w = wall_world(2.0)
    f = render_depth_frame(w, Pose(w.start, 0.0), cam)
    assert abs(nearest_obstacle_distance(f) - 2.0) < 1e-6
    r = np.full((48, 64), 10.0)
    r[3, 4] = 0.01
    assert nearest_obstacle_distance(_frame(r)) == 0.2


def test_layer_examples():
    p = build_layers(1.0, 1.0, 10.0)
    assert p.lay == 5
    assert p.boundaries == (0.0, 1.0, 3.0, 5.0, 7.0, 10.0)
    assert build_layers(2.0, 1.0, 10.0).t0 == 4.0
    assert build_layers(0.2, 1.0, 10.0, lay_max=8).lay == 8


def test_layer_count_matches_slab_oracle():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d_per = rng.uniform(1.0, 20.0)
        d0 = rng.uniform(0.2, d_per)
        assert layer_count(d0, d_per, 8) == slab_layer_count(d0, d_per, 8)


def test_slow_vehicle_clamp():
    assert build_layers(1.0, 0.0, 10.0).t0 == pytest.approx(2.0 / 0.1)


def test_center_zone_weight_reference_value(cam):
    # a layer whose midpoint sits at 0.5 m: interval [0, 1)
    part = build_layers(1.0, 1.0, 10.0)
    w = zone_weights(part, cam, M=3, sigma=1.0, mu=0.0)
    assert part.depths[0] == 0.5
    assert abs(w[0, 1, 1] - 0.378995) < 1e-6
    assert abs(w[0, 1, 1] - 9.5 / 10 / math.sqrt(2 * math.pi)) < 1e-12


def test_weights_symmetric_and_vanish_at_range(cam):
    part = build_layers(1.3, 1.0, 10.0)
    w = zone_weights(part, cam)
    np.testing.assert_allclose(w[:, :, 0], w[:, :, 2], rtol=1e-15)
    np.testing.assert_allclose(w[:, 0, :], w[:, 2, :], rtol=1e-15)
    assert zone_weight(10.0, 10.0, 0.3, -0.2) == 0.0


def test_weights_match_scalar_formula(cam):
    rng = np.random.default_rng(1)
    for _ in range(100):
        d_per = rng.uniform(3, 20)
        part = build_layers(rng.uniform(0.2, d_per), rng.uniform(0, 3), d_per)
        M = int(rng.integers(1, 6))
        sigma = rng.uniform(0.4, 3.0)
        w = zone_weights(part, cam, M, sigma)
        theta, beta = zone_centers(cam, M)
        for k, dk in enumerate(part.depths):
            for r in range(M):
                for c in range(M):
                    ref = zone_weight(d_per, dk, theta[c], beta[r], sigma)
                    assert w[k, r, c] == pytest.approx(ref, rel=1e-9, abs=1e-300)


def test_empty_frame_has_no_occupancy(cam):
    part = build_layers(10.0, 1.0, 10.0)
    occ = zone_occupancy(_frame(np.full((48, 64), 10.0)), part, cam)
    assert not occ.any()


def test_wall_occupancy_matches_pixel_binning(cam):
    w = wall_world(2.0)
    f = render_depth_frame(w, Pose(w.start, 0.0), cam)
    part = build_layers(2.0, 1.0, 10.0)
    assert part.boundaries[1:3] == (2.0, 6.0)
    occ = zone_occupancy(f, part, cam, M=3, rho_occ=0.02)
    # oracle: bin every pixel by hand
    expect = np.zeros_like(occ)
    counts = np.zeros(occ.shape)
    for i in range(cam.height):
        for j in range(cam.width):
            r = f.ranges[i, j]
            if r >= 10.0:
                continue
            k = max(n for n, b in enumerate(part.boundaries[:-1]) if r >= b)
            counts[k, i * 3 // cam.height, j * 3 // cam.width] += 1
    per_zone = (cam.height // 3) * (cam.width // 3)
    expect = counts / per_zone > 0.02
    np.testing.assert_array_equal(occ, expect)
    assert occ[1].all() and not occ[0].any() and not occ[2:].any()


def test_sparse_zone_below_threshold():
    cam = CameraModel(width=30, height=60)  # 10 x 20 = 200 pixels per zone
    r = np.full((60, 30), 10.0)
    r[0, 0] = 1.5
    part = build_layers(1.0, 1.0, 10.0)
    occ = zone_occupancy(_frame(r), part, cam, M=3, rho_occ=0.02)
    assert not occ.any()
    r[0:5, 0] = 1.5  # 5 of 200 pixels: 2.5%
    assert zone_occupancy(_frame(r), part, cam, M=3, rho_occ=0.02)[1, 0, 0]


def test_eci_examples(cam):
    part = build_layers(1.0, 1.0, 10.0)
    w = zone_weights(part, cam)
    assert compute_eci(np.zeros_like(w, bool), w) == 0.0
    assert compute_eci(np.ones_like(w, bool), w) == pytest.approx(1.0, rel=1e-15)
    occ = np.zeros_like(w, bool)
    k = np.unravel_index(np.argmax(w), w.shape)
    occ[k] = True
    brute = max(w.ravel()) / sum(w.ravel())
    assert compute_eci(occ, w) == pytest.approx(brute, rel=1e-12)


def test_eci_matches_weighted_sum_oracle(cam):
    rng = np.random.default_rng(2)
    for _ in range(100):
        part = build_layers(rng.uniform(0.2, 10), rng.uniform(0, 2), 10.0)
        w = zone_weights(part, cam)
        occ = rng.random(w.shape) < rng.random()
        assert compute_eci(occ, w) == pytest.approx(eci_sum(occ, w), rel=1e-9, abs=1e-15)


def test_delta_examples():
    assert update_delta([0.3] * 6, K=5) == 0.0
    assert update_delta([0.1, 0.1, 0.1, 0.1, 0.1, 0.6], K=5) == pytest.approx(0.5)
    assert update_delta([0.1, 0.9], K=5) == 0.0


def test_delta_replays_full_log(cam):
    rng = np.random.default_rng(3)
    comp = EciComputer(cam, K=5)
    log = []
    w = wall_world(3.0)
    for t in range(40):
        pose = Pose((w.start[0] + rng.uniform(-0.5, 2.0), rng.uniform(-3, 3), 1.5), rng.uniform(-1, 1))
        rep = comp.evaluate(render_depth_frame(w, pose, cam, t / 30), rng.uniform(0, 2))
        log.append(rep.eci)
        ref = log[-1] - log[-6] if len(log) >= 6 else 0.0
        assert rep.delta_eci == pytest.approx(ref, abs=1e-15)


def test_trace_export(tmp_path, cam):
    comp = EciComputer(cam)
    w = wall_world(2.0)
    reps = [comp.evaluate(render_depth_frame(w, Pose(w.start, 0.0), cam, t * 0.1), 1.0) for t in range(3)]
    path = tmp_path / "eci.csv"
    write_eci_trace(path, reps)
    lines = path.read_text().splitlines()
    assert lines[0] == "timestamp,eci,delta_eci,d0,Lay"
    assert len(lines) == 4
