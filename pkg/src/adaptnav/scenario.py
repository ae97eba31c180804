"""Synthetic obstacle worlds and a raycasting depth camera.

Worlds are made of axis-aligned boxes and vertical cylinders, which keeps
ray intersection analytic. Five generator presets cover the scenario
classes used for evaluation (varying-height city, park, indoor corridor,
similar-height city grid, village).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from adaptnav import _kernels

PRESETS = ("open-city", "dense-park", "corridor", "grid-city", "mixed-village")

# density (obstacles per 100 m^2) used when a preset is requested without one
DEFAULT_DENSITY = {
    "open-city": 2.0,
    "dense-park": 5.0,
    "corridor": 5.0,
    "grid-city": 1.5,
    "mixed-village": 2.0,
}

WORLD_FORMAT = 1
FLIGHT_ALTITUDE = 1.5
CORRIDOR_WIDTH = 5.0
MAX_CARVING_ATTEMPTS = 100

# geometry of every generated world
_LENGTH = 30.0
_WIDTH = 16.0
_HEIGHT = 6.0
_CLEARANCE = 1.5  # free radius kept around start and goal
_PASSAGE = 0.35  # half-width a connecting corridor must offer


class ScenarioError(ValueError):
    """Raised when a world cannot be generated or parsed."""


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    @property
    def center(self):
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def size(self):
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def contains(self, p, margin=0.0):
        return all(self.lo[i] - margin <= p[i] <= self.hi[i] + margin for i in range(3))

    def xy_distance(self, x, y):
        dx = max(self.lo[0] - x, 0.0, x - self.hi[0])
        dy = max(self.lo[1] - y, 0.0, y - self.hi[1])
        return math.hypot(dx, dy)

    def z_range(self):
        return self.lo[2], self.hi[2]

    def shrunk(self, amount):
        lo = tuple(a + amount for a in self.lo)
        hi = tuple(b - amount for b in self.hi)
        return Box(lo, hi)


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder standing on [z0, z1]."""

    x: float
    y: float
    radius: float
    z0: float
    z1: float

    @property
    def center(self):
        return (self.x, self.y, (self.z0 + self.z1) / 2)

    def contains(self, p, margin=0.0):
        if not (self.z0 - margin <= p[2] <= self.z1 + margin):
            return False
        return math.hypot(p[0] - self.x, p[1] - self.y) <= self.radius + margin

    def xy_distance(self, x, y):
        return max(0.0, math.hypot(x - self.x, y - self.y) - self.radius)

    def z_range(self):
        return self.z0, self.z1

    def shrunk(self, amount):
        return Cylinder(self.x, self.y, max(self.radius - amount, 0.0), self.z0 + amount, self.z1 - amount)


Obstacle = Box | Cylinder


@dataclass(frozen=True)
class World:
    bounds: tuple[tuple[float, float, float], tuple[float, float, float]]
    obstacles: tuple[Obstacle, ...]
    start: tuple[float, float, float]
    goal: tuple[float, float, float]
    tag: str = "custom"

    def __post_init__(self):
        lo, hi = self.bounds
        for name, p in (("start", self.start), ("goal", self.goal)):
            if not all(lo[i] <= p[i] <= hi[i] for i in range(3)):
                raise ScenarioError(f"{name} {p} outside bounds")
            if any(ob.contains(p) for ob in self.obstacles):
                raise ScenarioError(f"{name} {p} inside an obstacle")
        for ob in self.obstacles:
            if not _intersects_bounds(ob, lo, hi):
                raise ScenarioError(f"obstacle {ob} does not intersect the world bounds")

    def collides(self, p, radius=0.0) -> bool:
        return any(ob.contains(p, radius) for ob in self.obstacles)

    def packed(self):
        """(boxes, cylinders) arrays in the layout the ray kernels expect."""
        boxes = np.array([b.lo + b.hi for b in self.obstacles if isinstance(b, Box)], dtype=float).reshape(-1, 6)
        cyls = np.array(
            [(c.x, c.y, c.radius, c.z0, c.z1) for c in self.obstacles if isinstance(c, Cylinder)], dtype=float
        ).reshape(-1, 5)
        return boxes, cyls


def _intersects_bounds(ob, lo, hi):
    if isinstance(ob, Box):
        return all(ob.lo[i] <= hi[i] and ob.hi[i] >= lo[i] for i in range(3))
    return (
        lo[0] - ob.radius <= ob.x <= hi[0] + ob.radius
        and lo[1] - ob.radius <= ob.y <= hi[1] + ob.radius
        and ob.z0 <= hi[2]
        and ob.z1 >= lo[2]
    )


@dataclass(frozen=True)
class CameraModel:
    h_fov: float = math.radians(90.0)
    v_fov: float = math.radians(60.0)
    width: int = 64
    height: int = 48
    d_per: float = 10.0
    f_sen: float = 30.0

    def __post_init__(self):
        if not (0 < self.h_fov < math.pi and 0 < self.v_fov < math.pi):
            raise ValueError("fields of view must lie in (0, pi)")
        if self.d_per <= 0 or self.f_sen <= 0:
            raise ValueError("d_per and f_sen must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image must have at least one pixel")

    def pixel_angles(self):
        """Azimuth per column (left is positive) and elevation per row (top is positive)."""
        az = self.h_fov / 2 - (np.arange(self.width) + 0.5) * self.h_fov / self.width
        el = self.v_fov / 2 - (np.arange(self.height) + 0.5) * self.v_fov / self.height
        return az, el

    def body_rays(self):
        """Unit ray directions in the body frame, shape (height, width, 3)."""
        az, el = self.pixel_angles()
        ce = np.cos(el)[:, None]
        dirs = np.empty((self.height, self.width, 3))
        dirs[..., 0] = ce * np.cos(az)[None, :]
        dirs[..., 1] = ce * np.sin(az)[None, :]
        dirs[..., 2] = np.broadcast_to(np.sin(el)[:, None], (self.height, self.width))
        return dirs


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float]
    heading: float = 0.0


@dataclass(frozen=True, eq=False)
class DepthFrame:
    ranges: np.ndarray
    timestamp: float
    pose: Pose
    d_per: float = field(default=10.0)

    def __eq__(self, other):
        if not isinstance(other, DepthFrame):
            return NotImplemented
        return (
            self.timestamp == other.timestamp
            and self.pose == other.pose
            and np.array_equal(self.ranges, other.ranges)
        )

    __hash__ = None


def world_rays(pose: Pose, cam: CameraModel) -> np.ndarray:
    """Flattened (height*width, 3) ray directions in the world frame."""
    body = cam.body_rays().reshape(-1, 3)
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    out = np.empty_like(body)
    out[:, 0] = c * body[:, 0] - s * body[:, 1]
    out[:, 1] = s * body[:, 0] + c * body[:, 1]
    out[:, 2] = body[:, 2]
    return out


def render_depth_frame(world: World, pose: Pose, cam: CameraModel, timestamp: float = 0.0) -> DepthFrame:
    """Raycast every pixel against the world's obstacles.

    Rays without a hit report ``cam.d_per``; a camera inside an obstacle sees
    near-zero ranges.
    """
    boxes, cyls = _nearby(world, pose.position, cam.d_per)
    dirs = world_rays(pose, cam)
    ranges = _kernels.cast_rays(np.asarray(pose.position, dtype=float), dirs, boxes, cyls, cam.d_per, 1e-6)
    return DepthFrame(ranges.reshape(cam.height, cam.width), timestamp, pose, cam.d_per)


def _nearby(world, position, reach):
    boxes, cyls = world.packed()
    x, y = position[0], position[1]
    if len(boxes):
        dx = np.maximum(np.maximum(boxes[:, 0] - x, 0.0), x - boxes[:, 3])
        dy = np.maximum(np.maximum(boxes[:, 1] - y, 0.0), y - boxes[:, 4])
        boxes = boxes[np.hypot(dx, dy) <= reach]
    if len(cyls):
        d = np.hypot(cyls[:, 0] - x, cyls[:, 1] - y) - cyls[:, 2]
        cyls = cyls[d <= reach]
    return np.ascontiguousarray(boxes), np.ascontiguousarray(cyls)


# ---------------------------------------------------------------------------
# generation


def generate_scenario(preset: str, density: float | None = None, seed: int = 0) -> World:
    """Build a deterministic world for ``(preset, density, seed)``.

    Obstacle positions are resampled (up to 100 times) until start and goal
    are clear and connected at flight altitude; otherwise ScenarioError.
    """
    if preset not in PRESETS:
        raise ScenarioError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")
    if density is None:
        density = DEFAULT_DENSITY[preset]
    if not density >= 0:
        raise ScenarioError("density must be non-negative")
    lo = (0.0, -_WIDTH / 2, 0.0)
    hi = (_LENGTH, _WIDTH / 2, _HEIGHT)
    start = (1.0, 0.0, FLIGHT_ALTITUDE)
    goal = (_LENGTH - 1.0, 0.0, FLIGHT_ALTITUDE)
    rng = np.random.default_rng(seed)
    sampler = _SAMPLERS[preset]
    for _ in range(MAX_CARVING_ATTEMPTS):
        obstacles = sampler(rng, density, lo, hi)
        if _acceptable(obstacles, lo, hi, start, goal):
            return World((lo, hi), tuple(obstacles), start, goal, tag=preset)
    raise ScenarioError(
        f"density {density} too high for preset {preset!r}: no collision-free start/goal "
        f"after {MAX_CARVING_ATTEMPTS} carving attempts"
    )


def _blocks_flight(ob, margin=_PASSAGE):
    z0, z1 = ob.z_range()
    return z0 - margin <= FLIGHT_ALTITUDE <= z1 + margin


def _acceptable(obstacles, lo, hi, start, goal):
    for p in (start, goal):
        for ob in obstacles:
            if _blocks_flight(ob) and ob.xy_distance(p[0], p[1]) < _CLEARANCE:
                return False
    if not obstacles:
        return True
    # connectivity of start and goal on a 0.1 m slice at flight altitude
    res = 0.1
    nx = int(round((hi[0] - lo[0]) / res))
    ny = int(round((hi[1] - lo[1]) / res))
    xs = lo[0] + (np.arange(nx) + 0.5) * res
    ys = lo[1] + (np.arange(ny) + 0.5) * res
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    blocked = np.zeros((nx, ny), dtype=bool)
    for ob in obstacles:
        if not _blocks_flight(ob):
            continue
        if isinstance(ob, Box):
            blocked |= (
                (X >= ob.lo[0] - _PASSAGE) & (X <= ob.hi[0] + _PASSAGE)
                & (Y >= ob.lo[1] - _PASSAGE) & (Y <= ob.hi[1] + _PASSAGE)
            )
        else:
            blocked |= np.hypot(X - ob.x, Y - ob.y) <= ob.radius + _PASSAGE
    labels, _ = ndimage.label(~blocked)

    def cell(p):
        return int((p[0] - lo[0]) / res), int((p[1] - lo[1]) / res)

    a = labels[cell(start)]
    return a != 0 and a == labels[cell(goal)]


def _uniform_xy(rng, lo, hi, n, margin=0.0):
    x = rng.uniform(lo[0] + margin, hi[0] - margin, n)
    y = rng.uniform(lo[1] + margin, hi[1] - margin, n)
    return x, y


def _count(density, area):
    return int(round(density * area / 100.0))


def _box_at(x, y, sx, sy, z0, z1):
    return Box((x - sx / 2, y - sy / 2, z0), (x + sx / 2, y + sy / 2, z1))


def _open_city(rng, density, lo, hi):
    n = _count(density, (hi[0] - lo[0]) * (hi[1] - lo[1]))
    x, y = _uniform_xy(rng, lo, hi, n)
    sx = rng.uniform(1.5, 4.0, n)
    sy = rng.uniform(1.5, 4.0, n)
    h = rng.uniform(1.0, 10.0, n)
    return [_box_at(x[i], y[i], sx[i], sy[i], 0.0, h[i]) for i in range(n)]


def _dense_park(rng, density, lo, hi):
    n = _count(density, (hi[0] - lo[0]) * (hi[1] - lo[1]))
    x, y = _uniform_xy(rng, lo, hi, n)
    r = rng.uniform(0.15, 0.4, n)
    h = rng.uniform(3.0, 8.0, n)
    obs = [Cylinder(x[i], y[i], r[i], 0.0, h[i]) for i in range(n)]
    if n:
        # pavilion: four posts under a roof the vehicle can pass beneath
        px = rng.uniform(lo[0] + 6, hi[0] - 6)
        py = rng.uniform(lo[1] + 3, hi[1] - 3)
        for ox in (-2.0, 2.0):
            for oy in (-2.0, 2.0):
                obs.append(Cylinder(px + ox, py + oy, 0.15, 0.0, 3.0))
        obs.append(_box_at(px, py, 5.0, 5.0, 3.0, 3.3))
    return obs


def _corridor(rng, density, lo, hi):
    w = CORRIDOR_WIDTH
    obs = [
        Box((lo[0], w / 2, 0.0), (hi[0], w / 2 + 0.3, 4.0)),
        Box((lo[0], -w / 2 - 0.3, 0.0), (hi[0], -w / 2, 4.0)),
    ]
    n = _count(density, (hi[0] - lo[0]) * w)
    x = rng.uniform(lo[0], hi[0], n)
    y = rng.uniform(-w / 2, w / 2, n)
    sx = rng.uniform(0.4, 1.2, n)
    sy = rng.uniform(0.4, 1.2, n)
    h = rng.uniform(0.5, 2.5, n)
    obs += [_box_at(x[i], y[i], sx[i], sy[i], 0.0, h[i]) for i in range(n)]
    return obs


def _grid_city(rng, density, lo, hi):
    if density <= 0:
        return []
    spacing = math.sqrt(100.0 / density)
    foot = 0.5 * spacing
    ox = rng.uniform(0, spacing)
    oy = rng.uniform(0, spacing)
    obs = []
    xs = np.arange(lo[0] - spacing + ox, hi[0] + spacing, spacing)
    ys = np.arange(lo[1] - spacing + oy, hi[1] + spacing, spacing)
    for x in xs:
        for y in ys:
            sx = foot * rng.uniform(0.9, 1.1)
            sy = foot * rng.uniform(0.9, 1.1)
            b = _box_at(x, y, sx, sy, 0.0, rng.uniform(6.0, 7.0))
            if _intersects_bounds(b, lo, hi):
                obs.append(b)
    return obs


def _mixed_village(rng, density, lo, hi):
    n = _count(density, (hi[0] - lo[0]) * (hi[1] - lo[1]))
    n_house = n // 2
    n_tree = n - n_house
    x, y = _uniform_xy(rng, lo, hi, n_house)
    sx = rng.uniform(2.0, 4.0, n_house)
    sy = rng.uniform(2.0, 4.0, n_house)
    h = rng.uniform(2.5, 5.0, n_house)
    obs = [_box_at(x[i], y[i], sx[i], sy[i], 0.0, h[i]) for i in range(n_house)]
    tx, ty = _uniform_xy(rng, lo, hi, n_tree)
    tr = rng.uniform(0.2, 0.5, n_tree)
    th = rng.uniform(3.0, 7.0, n_tree)
    obs += [Cylinder(tx[i], ty[i], tr[i], 0.0, th[i]) for i in range(n_tree)]
    if n:
        # bridge deck across the river, above flight altitude
        bx = rng.uniform(lo[0] + 8, hi[0] - 8)
        obs.append(Box((bx - 1.5, lo[1], 2.6), (bx + 1.5, hi[1], 3.0)))
    return obs


_SAMPLERS = {
    "open-city": _open_city,
    "dense-park": _dense_park,
    "corridor": _corridor,
    "grid-city": _grid_city,
    "mixed-village": _mixed_village,
}


# ---------------------------------------------------------------------------
# world files


def _fmt(values: Sequence[float]) -> str:
    return " ".join(repr(float(v)) for v in values)


def dumps_world(world: World) -> str:
    lo, hi = world.bounds
    lines = [
        f"format={WORLD_FORMAT}",
        f"tag={world.tag}",
        f"bounds={_fmt(lo + hi)}",
        f"start={_fmt(world.start)}",
        f"goal={_fmt(world.goal)}",
    ]
    for ob in world.obstacles:
        if isinstance(ob, Box):
            lines.append(f"box {_fmt(ob.center)} {_fmt(ob.size)}")
        else:
            height = ob.z1 - ob.z0
            lines.append(f"cylinder {_fmt(ob.center)} {_fmt((ob.radius, height))}")
    return "\n".join(lines) + "\n"


def loads_world(text: str) -> World:
    header = {}
    obstacles = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
            continue
        kind, *nums = line.split()
        try:
            vals = [float(v) for v in nums]
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: bad number") from exc
        if kind == "box" and len(vals) == 6:
            c, s = vals[:3], vals[3:]
            obstacles.append(
                Box(tuple(c[i] - s[i] / 2 for i in range(3)), tuple(c[i] + s[i] / 2 for i in range(3)))
            )
        elif kind == "cylinder" and len(vals) == 5:
            cx, cy, cz, r, h = vals
            obstacles.append(Cylinder(cx, cy, r, cz - h / 2, cz + h / 2))
        else:
            raise ScenarioError(f"line {lineno}: unrecognised record {kind!r}")
    if header.get("format") != str(WORLD_FORMAT):
        raise ScenarioError(f"unsupported world format {header.get('format')!r}")
    try:
        b = [float(v) for v in header["bounds"].split()]
        start = tuple(float(v) for v in header["start"].split())
        goal = tuple(float(v) for v in header["goal"].split())
    except KeyError as exc:
        raise ScenarioError(f"missing header key {exc}") from exc
    return World((tuple(b[:3]), tuple(b[3:])), tuple(obstacles), start, goal, tag=header.get("tag", "custom"))


def save_world(world: World, path) -> None:
    Path(path).write_text(dumps_world(world))


def load_world(path) -> World:
    return loads_world(Path(path).read_text())
