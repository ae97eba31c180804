"""Resolution selection, trajectory scoring and the feasible frequency space.

A task configuration is admissible when

1. the perception task runs at least once per trajectory and no faster than
   the sensor: ``1/C_L <= f_per <= f_sen``;
2. collision checks never outpace perception and diff checks never outpace
   the sensor: ``0 <= f_col <= f_per``, ``0 <= f_dif <= f_sen``;
3. the per-trajectory execution budget fits on N cores:
   ``f_per C_per + C_plan/C_L + f_col C_col + f_dif C_dif <= N``;
4. the measured utilization plus the change in load stays within capacity:
   ``U_cur + sum_i (new_i - old_i) <= U_total``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_LADDER = (1.0, 0.5, 0.2, 0.1)
GAMMA = 1.0
S_MIN = 0.6

_EPS = 1e-9


@dataclass(frozen=True)
class TaskConfig:
    f_per: float
    f_col: float
    f_dif: float
    res: float

    def freqs(self):
        return np.array([self.f_per, self.f_col, self.f_dif])


@dataclass(frozen=True)
class Wcet:
    """Worst-case execution times in seconds."""

    per: float
    plan: float
    col: float
    dif: float

    def scaled(self, speed: float) -> "Wcet":
        return Wcet(self.per / speed, self.plan / speed, self.col / speed, self.dif / speed)


@dataclass(frozen=True)
class FrequencyBounds:
    feasible: bool
    f_per_min: float
    f_per_max: float
    f_col_max: float
    f_dif_max: float
    budget_residual: float
    util_residual: float
    wcet: Wcet
    c_l: float
    reason: str = ""

    @property
    def load_limit(self) -> float:
        """Largest perception+collision+diff load satisfying both capacity constraints."""
        return min(self.budget_residual, self.util_residual)

    def load(self, f_per, f_col, f_dif) -> float:
        return f_per * self.wcet.per + f_col * self.wcet.col + f_dif * self.wcet.dif


@dataclass(frozen=True)
class PathAssessment:
    L_len: float
    L_star: float
    L_bar: float
    rho_c: int
    rho_c_star: int
    gamma: float
    score: float


def select_resolution(map_origin, start, goal, ladder=DEFAULT_LADDER, escalate: bool = False) -> float:
    """Coarsest rung at which start and goal fall in different cells.

    ``ladder`` is ordered coarse to fine. With ``escalate`` the answer moves
    one rung finer (clamped at the finest).
    """
    if not ladder:
        raise ValueError("empty resolution ladder")
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if np.array_equal(start, goal):
        raise ValueError("start and goal coincide")
    origin = np.asarray(map_origin, dtype=float)
    choice = len(ladder) - 1
    for i, res in enumerate(ladder):
        a = np.floor((start - origin) / res + _EPS)
        b = np.floor((goal - origin) / res + _EPS)
        if np.abs(a - b).sum() > 0:
            choice = i
            break
    if escalate:
        choice = min(choice + 1, len(ladder) - 1)
    return ladder[choice]


def reference_length(rho_c, rho_c_star, gamma, L_bar) -> float:
    if rho_c_star <= 0:
        raise ValueError("rho_c_star must be positive")
    if not 0 <= rho_c <= rho_c_star:
        raise ValueError("need 0 <= rho_c <= rho_c_star")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return (1 + gamma * rho_c / rho_c_star) * L_bar


def trajectory_score(L_len, L_star, L_bar) -> float:
    """exp(-(L - L*) / L_bar) for L >= L*, and 1 for shorter paths."""
    if L_bar <= 0:
        raise ValueError("L_bar must be positive")
    if L_len <= L_star:
        return 1.0
    return math.exp(-(L_len - L_star) / L_bar)


def assess_path(L_len, L_bar, rho_c, rho_c_star, gamma=GAMMA) -> PathAssessment:
    L_star = reference_length(rho_c, rho_c_star, gamma, L_bar)
    return PathAssessment(L_len, L_star, L_bar, rho_c, rho_c_star, gamma, trajectory_score(L_len, L_star, L_bar))


def config_load(cfg: TaskConfig, wcet: Wcet, c_l: float) -> float:
    """Execution load of a configuration in cores (planning counted once per trajectory)."""
    return cfg.f_per * wcet.per + wcet.plan / c_l + cfg.f_col * wcet.col + cfg.f_dif * wcet.dif


def feasible_bounds(c_l, f_sen, wcet: Wcet, n_cores, u_cur=0.0, u_total=None, current: TaskConfig | None = None) -> FrequencyBounds:
    """Box and capacity bounds on (f_per, f_col, f_dif) for one trajectory.

    ``current`` is the configuration in force when ``u_cur`` was measured;
    its load is what a reconfiguration gives back.
    """
    if c_l <= 0:
        raise ValueError("C_L must be positive")
    if min(wcet.per, wcet.plan, wcet.col, wcet.dif) <= 0:
        raise ValueError("WCETs must be positive")
    if n_cores < 1:
        raise ValueError("need at least one core")
    if u_total is None:
        u_total = float(n_cores)
    f_min = 1.0 / c_l
    old_load = config_load(current, wcet, c_l) if current is not None else 0.0
    plan_util = wcet.plan / c_l
    budget = n_cores - plan_util
    util = u_total - u_cur + old_load - plan_util
    reason = ""
    if f_min > f_sen * (1 + _EPS):
        reason = f"trajectory too short: 1/C_L={f_min:.3g} Hz exceeds f_sen={f_sen:.3g} Hz"
    elif f_min * wcet.per > budget * (1 + _EPS) + _EPS:
        reason = "flight-time budget cannot fit one perception update"
    elif f_min * wcet.per > util * (1 + _EPS) + _EPS:
        reason = "utilization headroom cannot fit one perception update"
    return FrequencyBounds(
        feasible=not reason,
        f_per_min=f_min,
        f_per_max=f_sen,
        f_col_max=f_sen,
        f_dif_max=f_sen,
        budget_residual=budget,
        util_residual=util,
        wcet=wcet,
        c_l=c_l,
        reason=reason,
    )


def satisfies(cfg: TaskConfig, bounds: FrequencyBounds, tol: float = 1e-9) -> bool:
    if not (bounds.f_per_min * (1 - tol) <= cfg.f_per <= bounds.f_per_max * (1 + tol)):
        return False
    if not (0 <= cfg.f_col <= cfg.f_per * (1 + tol) and 0 <= cfg.f_dif <= bounds.f_dif_max * (1 + tol)):
        return False
    return bounds.load(cfg.f_per, cfg.f_col, cfg.f_dif) <= bounds.load_limit + tol * max(1.0, abs(bounds.load_limit))


def constraint_status(cfg: TaskConfig, bounds: FrequencyBounds, tol: float = 1e-9):
    """Per-constraint satisfaction flags, in the order listed in the module docstring."""
    load = bounds.load(cfg.f_per, cfg.f_col, cfg.f_dif)
    return (
        bounds.f_per_min * (1 - tol) <= cfg.f_per <= bounds.f_per_max * (1 + tol),
        0 <= cfg.f_col <= cfg.f_per * (1 + tol) and 0 <= cfg.f_dif <= bounds.f_dif_max * (1 + tol),
        load <= bounds.budget_residual + tol,
        load <= bounds.util_residual + tol,
    )


def project_config(cfg: TaskConfig, bounds: FrequencyBounds) -> TaskConfig:
    """Return the nearest admissible configuration under proportional scaling.

    Frequencies are first clamped into their boxes; if the capacity limit is
    still exceeded all three are scaled by the largest common factor that
    fits, with perception held at its floor once it reaches it.
    """
    if not bounds.feasible:
        raise ValueError(f"cannot project onto infeasible bounds: {bounds.reason}")
    if satisfies(cfg, bounds):
        return cfg
    f_per = min(max(cfg.f_per, bounds.f_per_min), bounds.f_per_max)
    f_col = min(max(cfg.f_col, 0.0), f_per, bounds.f_col_max)
    f_dif = min(max(cfg.f_dif, 0.0), bounds.f_dif_max)
    limit = bounds.load_limit
    w = bounds.wcet
    load = bounds.load(f_per, f_col, f_dif)
    if load > limit:
        alpha = limit / load
        if alpha * f_per >= bounds.f_per_min:
            f_per, f_col, f_dif = alpha * f_per, alpha * f_col, alpha * f_dif
        else:
            rest = f_col * w.col + f_dif * w.dif
            spare = max(limit - bounds.f_per_min * w.per, 0.0)
            alpha = min(1.0, spare / rest) if rest > 0 else 0.0
            f_per = bounds.f_per_min
            f_col = min(alpha * f_col, f_per)
            f_dif = alpha * f_dif
    return replace(cfg, f_per=f_per, f_col=f_col, f_dif=f_dif)
