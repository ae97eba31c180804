import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from adaptnav.scenario import Box, CameraModel, World  # noqa: E402
from adaptnav.strategy import TaskConfig, Wcet  # noqa: E402


@pytest.fixture
def cam():
    return CameraModel()


def wall_world(distance=2.0, thickness=0.5):
    """A wide wall whose near face is ``distance`` metres ahead of the start."""
    start = (1.0, 0.0, 1.5)
    x0 = start[0] + distance
    wall = Box((x0, -20.0, -10.0), (x0 + thickness, 20.0, 16.0))
    return World(((0.0, -20.0, 0.0), (30.0, 20.0, 6.0)), (wall,), start, (0.5, 5.0, 1.5), "wall")


def empty_world():
    return World(((0.0, -8.0, 0.0), (30.0, 8.0, 6.0)), (), (1.0, 0.0, 1.5), (29.0, 0.0, 1.5), "empty")


def random_context(rng):
    """One randomized constraint context plus a raw configuration to project."""
    wcet = Wcet(*(rng.uniform(0.001, 0.2, 4) * np.array([0.3, 1.0, 0.1, 0.05])))
    n = int(rng.integers(1, 7))
    ctx = {
        "c_l": float(rng.uniform(0.02, 60.0)),
        "f_sen": float(rng.choice([10.0, 15.0, 30.0, 60.0])),
        "c_per": wcet.per,
        "c_plan": wcet.plan,
        "c_col": wcet.col,
        "c_dif": wcet.dif,
        "n_cores": n,
        "u_total": float(n),
        "u_cur": float(rng.uniform(0.0, 1.2 * n)),
        "old": None,
    }
    if rng.random() < 0.5:
        ctx["old"] = tuple(float(x) for x in rng.uniform(0.0, 30.0, 3))
    raw = TaskConfig(*(float(x) for x in rng.uniform(-5.0, 80.0, 3)), 0.1)
    return ctx, wcet, raw
