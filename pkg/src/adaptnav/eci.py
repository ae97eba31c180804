"""Environmental complexity index (ECI) from raw depth frames.

The sensing volume is cut into depth layers whose thickness follows the
stopping distance to the nearest obstacle, and each layer into an M x M
grid of angular zones aligned with the heading. Zones carry a weight that
falls off linearly with depth and as a Gaussian with angular deviation;
the index is the weight-normalized share of occupied zones.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from adaptnav.scenario import CameraModel, DepthFrame

D_MIN = 0.2
V_MIN = 0.1
LAY_MAX = 8
RHO_OCC = 0.02


@dataclass(frozen=True)
class LayerPartition:
    d0: float
    t0: float
    boundaries: tuple[float, ...]
    d_per: float

    @property
    def lay(self) -> int:
        return len(self.boundaries) - 1

    @property
    def depths(self) -> np.ndarray:
        """Representative depth of each layer: the midpoint of its interval."""
        b = np.asarray(self.boundaries)
        return 0.5 * (b[:-1] + b[1:])


@dataclass(frozen=True)
class EciReport:
    eci: float
    delta_eci: float
    timestamp: float
    d0: float = float("nan")
    lay: int = 0


def nearest_obstacle_distance(frame: DepthFrame, d_min: float = D_MIN) -> float:
    return float(np.clip(frame.ranges.min(), d_min, frame.d_per))


def layer_count(d0: float, d_per: float, lay_max: int = LAY_MAX) -> int:
    lay = math.floor((d_per - d0) / (2 * d0)) + 1
    return int(min(max(lay, 1), lay_max))


def build_layers(d0: float, v_cur: float, d_per: float, lay_max: int = LAY_MAX, v_min: float = V_MIN) -> LayerPartition:
    """Depth layers [0, d0), [d0, 3 d0), [3 d0, 5 d0), ...

    The outermost boundary is always moved to ``d_per`` so the partition
    covers the whole sensing range.
    """
    if not 0 < d0 <= d_per:
        raise ValueError("need 0 < d0 <= d_per")
    if v_cur < 0:
        raise ValueError("v_cur must be non-negative")
    t0 = 2 * d0 / max(v_cur, v_min)
    lay = layer_count(d0, d_per, lay_max)
    bounds = [0.0, d0] + [d0 + 2 * d0 * k for k in range(1, lay)]
    bounds = bounds[: lay + 1]
    bounds[-1] = d_per
    return LayerPartition(d0, t0, tuple(bounds), d_per)


def zone_centers(cam: CameraModel, M: int):
    """Azimuth of each zone column and pitch of each zone row (radians)."""
    theta = cam.h_fov / 2 - (np.arange(M) + 0.5) * cam.h_fov / M
    beta = cam.v_fov / 2 - (np.arange(M) + 0.5) * cam.v_fov / M
    return theta, beta


def zone_weights(part: LayerPartition, cam: CameraModel, M: int = 3, sigma: float = 1.0, mu: float = 0.0) -> np.ndarray:
    """Weights shaped (Lay, M, M), indexed [layer, pitch row, azimuth column]."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if M < 1:
        raise ValueError("M must be at least 1")
    peak = 1.0 / (sigma * math.sqrt(2 * math.pi))
    if peak > 1.0:
        raise ValueError(f"sigma={sigma} gives a peak weight {peak:.3f} > 1")
    theta, beta = zone_centers(cam, M)
    ang = np.exp(-((theta[None, :] - mu) ** 2 + (beta[:, None] - mu) ** 2) / (4 * sigma**2))
    decay = (part.d_per - part.depths) / part.d_per
    return decay[:, None, None] * peak * ang[None, :, :]


def _zone_index(cam: CameraModel, M: int) -> np.ndarray:
    rows = (np.arange(cam.height) * M) // cam.height
    cols = (np.arange(cam.width) * M) // cam.width
    return (rows[:, None] * M + cols[None, :]).ravel()


def zone_occupancy(frame: DepthFrame, part: LayerPartition, cam: CameraModel, M: int = 3, rho_occ: float = RHO_OCC) -> np.ndarray:
    """Binary (Lay, M, M) occupancy.

    A zone is occupied in layer k when more than ``rho_occ`` of its pixels
    return a range inside that layer. No-hit pixels (range == d_per) never
    count.
    """
    zones = _zone_index(cam, M)
    r = frame.ranges.ravel()
    hit = r < part.d_per
    layer = np.searchsorted(np.asarray(part.boundaries), r, side="right") - 1
    hit &= (layer >= 0) & (layer < part.lay)
    nz = M * M
    counts = np.bincount(layer[hit] * nz + zones[hit], minlength=part.lay * nz).reshape(part.lay, M, M)
    pixels = np.bincount(zones, minlength=nz).reshape(M, M)
    return (counts / pixels[None]) > rho_occ


def compute_eci(occ: np.ndarray, w: np.ndarray) -> float:
    occ = np.asarray(occ)
    w = np.asarray(w, dtype=float)
    if occ.shape != w.shape:
        raise ValueError("occupancy and weights differ in shape")
    total = w.sum()
    if total <= 0:
        return 0.0
    return float(min(1.0, (w * occ).sum() / total))


def update_delta(history, K: int = 5) -> float:
    """eci_t - eci_{t-K}; zero until K + 1 samples exist."""
    if K < 1:
        raise ValueError("K must be >= 1")
    vals = [h.eci if isinstance(h, EciReport) else float(h) for h in history]
    if len(vals) < K + 1:
        return 0.0
    return vals[-1] - vals[-1 - K]


class EciComputer:
    """Per-episode ECI evaluator owning the history ring used for the delta."""

    def __init__(self, cam: CameraModel, M=3, sigma=1.0, mu=0.0, K=5, rho_occ=RHO_OCC,
                 lay_max=LAY_MAX, d_min=D_MIN, v_min=V_MIN):
        self.cam = cam
        self.M = M
        self.sigma = sigma
        self.mu = mu
        self.K = K
        self.rho_occ = rho_occ
        self.lay_max = lay_max
        self.d_min = d_min
        self.v_min = v_min
        self.history: deque[EciReport] = deque(maxlen=K + 1)

    def evaluate(self, frame: DepthFrame, v_cur: float) -> EciReport:
        d0 = nearest_obstacle_distance(frame, self.d_min)
        part = build_layers(d0, v_cur, self.cam.d_per, self.lay_max, self.v_min)
        w = zone_weights(part, self.cam, self.M, self.sigma, self.mu)
        occ = zone_occupancy(frame, part, self.cam, self.M, self.rho_occ)
        eci = compute_eci(occ, w)
        vals = [h.eci for h in self.history] + [eci]
        delta = update_delta(vals, self.K)
        rep = EciReport(eci, delta, frame.timestamp, d0, part.lay)
        self.history.append(rep)
        return rep


def write_eci_trace(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["timestamp", "eci", "delta_eci", "d0", "Lay"])
        for r in reports:
            out.writerow([repr(r.timestamp), repr(r.eci), repr(r.delta_eci), repr(r.d0), r.lay])
