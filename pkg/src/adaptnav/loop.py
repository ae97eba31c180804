"""Closed-loop flight simulation.

Each sensor tick renders a depth frame, evaluates the complexity index,
lets the strategy choose a task configuration, releases the periodic
perception / collision-check / diff-check jobs into the EDF engine and
steps a point-mass vehicle along the current trajectory. Job outputs take
effect only when the simulated job completes, so a slow platform sees a
staler map.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from adaptnav.eci import EciComputer
from adaptnav.mapping import OccupancyMap, update_map
from adaptnav.planning import NoPathError, PlanningGrid, Trajectory, collision_check, plan_trajectory, slowdown_stale
from adaptnav.policy import (
    DEFAULT_GRIDS,
    PolicyParams,
    PolicyState,
    RewardWeights,
    action_frequencies,
    compute_r_c,
    compute_r_f,
    greedy_action,
    heuristic_policy,
    policy_forward,
    sample_action,
    step_reward,
)
from adaptnav.scenario import CameraModel, Pose, World, render_depth_frame
from adaptnav.scheduler import EdfEngine, FailsafeMonitor, Mode, PlatformModel
from adaptnav.strategy import (
    DEFAULT_LADDER,
    TaskConfig,
    Wcet,
    assess_path,
    config_load,
    constraint_status,
    feasible_bounds,
    project_config,
    satisfies,
    select_resolution,
)

STRATEGIES = ("adaptive-rl", "adaptive-heuristic", "fixed-baseline")
BASELINE_CONFIG = TaskConfig(30.0, 20.0, 20.0, 0.1)
REFERENCE_WCET = Wcet(per=0.020, plan=0.120, col=0.005, dif=0.003)


class CheckpointMissing(FileNotFoundError):
    """adaptive-rl was requested without a trained policy."""


@dataclass(frozen=True)
class LoopConfig:
    camera: CameraModel = field(default_factory=CameraModel)
    v_max: float = 2.0
    a_max: float = 2.0
    goal_tol: float = 0.5
    timeout: float = 180.0
    wcet: Wcet = REFERENCE_WCET
    res_ref: float = 0.1
    per_scale_min: float = 0.25
    per_scale_max: float = 4.0
    ladder: tuple = DEFAULT_LADDER
    gamma: float = 1.0
    s_min: float = 0.6
    escalation_hold: float = 10.0  # metres flown before an escalated rung relaxes
    eci_M: int = 3
    eci_sigma: float = 1.0
    eci_K: int = 5
    rho_occ: float = 0.02
    lay_max: int = 8
    diff_threshold: float = 0.15
    plan_deadline: float = 0.5
    failsafe_window: float = 2.0
    failsafe_threshold: float = 1.0
    failsafe_hysteresis: float = 0.05
    baseline: TaskConfig = BASELINE_CONFIG
    unknown_factor: float = 0.5
    uav_radius: float = 0.0
    util_window: float = 1.0
    warmup: float = 5.0
    rl_greedy: bool = False  # deploy the most likely action instead of sampling
    grids: tuple = DEFAULT_GRIDS
    rewards: RewardWeights = field(default_factory=RewardWeights)

    def wcet_for(self, res: float, speed: float = 1.0) -> Wcet:
        """Platform WCETs; perception cost follows the cell count of the map."""
        scale = min(max((self.res_ref / res) ** 3, self.per_scale_min), self.per_scale_max)
        return replace(self.wcet, per=self.wcet.per * scale).scaled(speed)


@dataclass
class UAVState:
    position: np.ndarray
    velocity: np.ndarray
    heading: float
    v_max: float
    a_max: float
    arc: float = 0.0

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass
class EpisodeMetrics:
    world: str
    platform: str
    strategy: str
    seed: int
    success: bool
    outcome: str
    flight_time: float
    path_length: float
    straight_distance: float
    mean_util: float
    velocity_std: float
    miss_ratio: float
    jobs: int
    misses: int
    collision_count: int
    plans: int
    no_path: int
    infeasible_ticks: int
    constraint_violations: int
    mean_f_per: float
    mean_f_col: float
    mean_f_dif: float
    mean_res: float
    dt: float = 1 / 30
    speeds: np.ndarray = field(default=None, repr=False)
    utils: np.ndarray = field(default=None, repr=False)
    eci: np.ndarray = field(default=None, repr=False)
    positions: np.ndarray = field(default=None, repr=False)
    trace: list = field(default=None, repr=False)

    CSV_FIELDS = (
        "world", "platform", "strategy", "seed", "success", "outcome", "flight_time", "path_length",
        "straight_distance", "mean_util", "velocity_std", "miss_ratio", "jobs", "misses",
        "collision_count", "plans", "no_path", "infeasible_ticks", "constraint_violations",
        "mean_f_per", "mean_f_col", "mean_f_dif", "mean_res",
    )

    def row(self):
        out = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            if isinstance(v, bool):
                out.append(str(int(v)))
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


TRACE_FIELDS = ("time", "x", "y", "z", "speed", "eci", "f_per", "f_col", "f_dif", "res", "U_cur")


# ---------------------------------------------------------------------------
# small operations


def diff_detect(eci_history, threshold: float = 0.15, K: int = 5) -> bool:
    """True (CHANGED) when the index moved by more than ``threshold`` over the
    last K frames (or over whatever shorter history exists)."""
    vals = [getattr(h, "eci", h) for h in eci_history]
    if not vals:
        raise ValueError("empty history")
    m = min(K, len(vals) - 1)
    return abs(vals[-1] - vals[-1 - m]) > threshold


def step_dynamics(state: UAVState, traj: Trajectory | None, dt: float) -> UAVState:
    """Advance the point mass along ``traj`` with speed changes bounded by a_max*dt.

    Without a trajectory the vehicle brakes along its current velocity.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    speed = state.speed
    dv_max = state.a_max * dt
    if traj is None or traj.total_length <= 0:
        new_speed = max(0.0, speed - dv_max)
        direction = state.velocity / speed if speed > 0 else np.zeros(3)
        pos = state.position + direction * new_speed * dt
        return replace(state, position=pos, velocity=direction * new_speed)
    s = state.arc
    L = traj.total_length
    target = min(traj.speed_limit_at(s), state.v_max, _braking_speed(traj, s, state.a_max))
    new_speed = min(max(speed + min(max(target - speed, -dv_max), dv_max), 0.0), state.v_max)
    s_new = min(L, s + new_speed * dt)
    pos = traj.point_at(s_new)
    tangent = traj.tangent_at(min(s_new, L - 1e-9) if L > 1e-9 else s_new)
    heading = math.atan2(tangent[1], tangent[0]) if np.any(tangent[:2]) else state.heading
    return replace(state, position=pos, velocity=tangent * new_speed, heading=heading, arc=s_new)


def _braking_speed(traj: Trajectory, s: float, a_max: float) -> float:
    """Highest speed at arc ``s`` that can still meet every slower limit ahead
    and stop at the end."""
    best = math.sqrt(2 * a_max * max(traj.total_length - s, 0.0))
    i = traj.segment_at(s)
    for j in range(i + 1, len(traj.v_profile)):
        d = traj.cum[j] - s
        best = min(best, math.sqrt(traj.v_profile[j] ** 2 + 2 * a_max * max(d, 0.0)))
    return best


def velocity_std(metrics_or_speeds, dt: float | None = None, warmup: float | None = None) -> float:
    """Population standard deviation of speed after the warm-up window."""
    if isinstance(metrics_or_speeds, EpisodeMetrics):
        speeds = metrics_or_speeds.speeds
        dt = metrics_or_speeds.dt if dt is None else dt
        warmup = 5.0 if warmup is None else warmup
    else:
        speeds = metrics_or_speeds
        dt = 1.0 if dt is None else dt
        warmup = 0.0 if warmup is None else warmup
    speeds = np.asarray(speeds, dtype=float)
    if len(speeds) < 2:
        raise ValueError("need at least two speed samples")
    skip = int(math.floor(warmup / dt + 1e-9))
    tail = speeds[skip:] if len(speeds) - skip >= 2 else speeds
    return float(np.std(tail))


# ---------------------------------------------------------------------------
# strategies


class FixedController:
    adaptive = False

    def __init__(self, cfg: TaskConfig):
        self.cfg = cfg

    def decide(self, ctx):
        return self.cfg


class HeuristicController:
    adaptive = True

    def decide(self, ctx):
        return heuristic_policy(ctx["state"], ctx["bounds"], ctx["res"])


class PolicyController:
    """Runs a trained policy. ``sample=True`` draws actions from the policy's
    distribution with the episode-seeded generator; otherwise the most likely
    grid point is used."""

    adaptive = True

    def __init__(self, params: PolicyParams, rng=None, sample=False, recorder=None):
        self.params = params
        self.rng = np.random.default_rng(rng)
        self.sample = sample
        self.recorder = recorder

    def decide(self, ctx):
        # utilization is normalised by the platform actually flown
        norm = replace(self.params.norm, u_total=ctx["episode"].platform.u_total)
        x = ctx["state"].vector(norm)
        dists, value = policy_forward(x, self.params)
        action = sample_action(dists, self.rng) if self.sample else greedy_action(dists)
        f_per, f_col, f_dif = action_frequencies(action, self.params.grids)
        raw = TaskConfig(f_per, f_col, f_dif, ctx["res"])
        if self.recorder is not None:
            logp = float(sum(math.log(max(d[a], 1e-300)) for d, a in zip(dists, action)))
            self.recorder.record(x, action, logp, value, raw, ctx)
        return project_config(raw, ctx["bounds"])


def make_controller(strategy, config: LoopConfig, policy=None, rng=None, recorder=None):
    if strategy == "fixed-baseline":
        return FixedController(config.baseline)
    if strategy == "adaptive-heuristic":
        return HeuristicController()
    if strategy == "adaptive-rl":
        if policy is None:
            raise CheckpointMissing("adaptive-rl needs a policy checkpoint")
        sample = recorder is not None or not config.rl_greedy
        return PolicyController(policy, rng, sample=sample, recorder=recorder)
    raise ValueError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")


# ---------------------------------------------------------------------------
# episode


class _Episode:
    def __init__(self, world: World, platform: PlatformModel, controller, config: LoopConfig, seed, trace):
        self.world = world
        self.platform = platform
        self.ctl = controller
        self.c = config
        self.seed = seed
        self.cam = config.camera
        self.dt = 1.0 / self.cam.f_sen
        self.want_trace = trace
        self.lo, self.hi = (np.asarray(b, dtype=float) for b in world.bounds)
        self.goal = np.asarray(world.goal, dtype=float)
        start = np.asarray(world.start, dtype=float)
        d = self.goal - start
        self.uav = UAVState(start.copy(), np.zeros(3), math.atan2(d[1], d[0]), config.v_max, config.a_max)
        if controller.adaptive:
            res0 = select_resolution(self.lo, start, self.goal, config.ladder)
            self.active = TaskConfig(self.cam.f_sen, 0.0, self.cam.f_sen, res0)
        else:
            self.active = controller.cfg
        # perception always integrates into a map at the finest rung; the
        # configured resolution drives the modelled WCET and the planning grid
        self.master_res = min(min(config.ladder), config.baseline.res)
        self.map = OccupancyMap.empty(self.lo, self.hi, self.master_res)
        self.engine = EdfEngine(platform.cores)
        self.eci = EciComputer(self.cam, M=config.eci_M, sigma=config.eci_sigma, K=config.eci_K,
                               rho_occ=config.rho_occ, lay_max=config.lay_max)
        self.monitor = FailsafeMonitor(platform.u_total, config.failsafe_window, config.failsafe_threshold,
                                       config.failsafe_hysteresis)
        self.traj: Trajectory | None = None
        self.plan_pending = False
        self.want_plan = True
        self.escalate = False
        self.plan_again = False
        self.floor = 0  # ladder index
        self.floor_mark = 0.0
        self.odometer = 0.0
        self.next_rel = {"per": 0.0, "col": 0.0, "dif": 0.0}
        self.last_rel = {"per": -math.inf, "col": -math.inf, "dif": -math.inf}
        self.frame = None
        self.recent_u: deque = deque(maxlen=max(1, int(round(config.util_window / self.dt))))
        self._grid_key = None
        self._grids = {}
        self.plan_res = self.active.res
        # counters
        self.plans = 0
        self.no_path = 0
        self.infeasible = 0
        self.violations = 0
        self.hold = False

    # --- helpers -----------------------------------------------------------
    def wcet(self, res=None) -> Wcet:
        return self.c.wcet_for(self.active.res if res is None else res, self.platform.speed)

    def grid(self, res: float | None = None) -> PlanningGrid:
        """Planning grid of the current map at cell size ``res`` (cached per map version)."""
        res = self.master_res if res is None else res
        if self._grid_key != self.map.version:
            self._grid_key = self.map.version
            self._grids = {self.master_res: PlanningGrid(self.map, float(self.world.start[2]))}
        if res not in self._grids:
            self._grids[res] = self._grids[self.master_res].coarsened(res)
        return self._grids[res]

    def c_l(self) -> float:
        if self.traj is not None and self.traj.duration > 0:
            return self.traj.duration
        return max(float(np.linalg.norm(self.goal - self.uav.position)), self.c.goal_tol) / self.c.v_max

    def trigger_plan(self, escalate=False):
        self.escalate = self.escalate or escalate
        if self.plan_pending:
            # the running job predates this trigger; plan again once it is done
            self.plan_again = True
            return
        self.plan_pending = True
        self.engine.release("plan", self.wcet().plan, self.engine.now + self.c.plan_deadline, self.escalate)
        self.escalate = False

    # --- job completions ---------------------------------------------------
    def on_complete(self, job):
        if job.task == "per":
            update_map(self.map, job.payload, self.cam)
        elif job.task == "col":
            grid = self.grid(self.plan_res)
            if self.traj is not None and collision_check(self.map, self.traj, self.uav.arc, grid):
                self.trigger_plan(escalate=True)
            elif slowdown_stale(self.traj, self.uav.arc, grid):
                self.trigger_plan()
        elif job.task == "dif":
            if diff_detect(self.eci.history, self.c.diff_threshold, self.c.eci_K):
                self.trigger_plan()
        elif job.task == "plan":
            self.plan_pending = False
            self.replan(bool(job.payload))
            if self.plan_again:
                self.plan_again = False
                self.trigger_plan()

    def on_miss(self, job):
        if job.task == "plan":
            self.plan_pending = False
            self.plan_again = False
            self.escalate = self.escalate or bool(job.payload)
            self.want_plan = True

    def replan(self, escalated=False):
        pos = self.uav.position.copy()
        if np.linalg.norm(self.goal[:2] - pos[:2]) < 1e-9:
            return
        if self.ctl.adaptive:
            ladder = self.c.ladder
            # an escalated rung stays a floor, relaxing one rung per escalation_hold metres flown
            while self.floor > 0 and self.odometer - self.floor_mark >= self.c.escalation_hold:
                self.floor -= 1
                self.floor_mark += self.c.escalation_hold
            i = max(ladder.index(select_resolution(self.lo, pos, self.goal, ladder)), self.floor)
            if escalated:
                i = min(i + 1, len(ladder) - 1)
                self.floor, self.floor_mark = i, self.odometer
            rungs = list(ladder[i:])
        else:
            rungs = [self.active.res]
        L_bar = float(np.linalg.norm(self.goal - pos))
        for res in rungs:
            grid = self.grid(res)
            si = grid.cell_index(pos)
            if res != rungs[-1] and grid.inside(si) and grid.occupied[si]:
                # the vehicle's own coarse cell holds an obstacle surface: too coarse here
                continue
            try:
                traj = plan_trajectory(self.map, pos, self.goal, self.c.v_max, self.c.a_max, grid,
                                       self.cam.d_per, self.c.unknown_factor)
            except NoPathError:
                continue
            score = assess_path(traj.total_length, L_bar, int(grid.occupied.sum()), int(grid.occupied.size),
                                self.c.gamma).score
            self.active = replace(self.active, res=res)
            self.plan_res = res
            self.traj = traj
            self.uav.arc = 0.0
            self.plans += 1
            if score < self.c.s_min and not escalated and self.ctl.adaptive:
                self.trigger_plan(escalate=True)  # refine right away instead of waiting for the next trigger
            return
        self.no_path += 1
        self.traj = None
        self.escalate = True
        self.want_plan = True

    # --- per tick ----------------------------------------------------------
    def decide(self, report):
        if not self.ctl.adaptive:
            return
        wcet = self.wcet()
        u_meas = float(np.mean(self.recent_u)) if self.recent_u else 0.0
        bounds = feasible_bounds(self.c_l(), self.cam.f_sen, wcet, self.platform.cores, u_meas,
                                 self.platform.u_total, current=self.active)
        if not bounds.feasible:
            self.infeasible += 1
            self.hold = True
            return
        to_goal = self.goal - self.uav.position
        state = PolicyState(
            eci=report.eci,
            abs_delta_eci=abs(report.delta_eci),
            status=constraint_status(self.active, bounds),
            f_cur=(self.active.f_per, self.active.f_col, self.active.f_dif),
            speed=self.uav.speed,
            u_cur=u_meas,
            goal_dir=tuple(to_goal),
            goal_dist=float(np.linalg.norm(to_goal)),
        )
        ctx = {"state": state, "bounds": bounds, "res": self.active.res, "wcet": wcet, "episode": self}
        new = self.ctl.decide(ctx)
        if not satisfies(new, bounds):
            self.violations += 1
        self.active = new

    def release_periodic(self, t0, t1):
        freqs = {"per": self.active.f_per, "col": self.active.f_col, "dif": self.active.f_dif}
        events = []
        for task, f in freqs.items():
            if f <= 0:
                self.next_rel[task] = math.inf
                continue
            nxt = min(self.next_rel[task], self.last_rel[task] + 1.0 / f)
            nxt = max(nxt, t0)
            while nxt < t1 - 1e-12:
                events.append((nxt, task, f))
                nxt += 1.0 / f
            self.next_rel[task] = nxt
        events.sort(key=lambda e: (e[0], ("per", "col", "dif").index(e[1])))
        wcet = self.wcet()
        for when, task, f in events:
            self.engine.advance(when, self.on_complete, self.on_miss)
            self.last_rel[task] = when
            cost = {"per": wcet.per, "col": wcet.col, "dif": wcet.dif}[task]
            payload = self.frame if task == "per" else None
            self.engine.release(task, cost, when + 1.0 / f, payload)

    def run(self):
        c = self.c
        dt = self.dt
        speeds, utils, ecis, positions, trace = [], [], [], [self.uav.position.copy()], []
        f_acc = np.zeros(3)
        res_acc = 0.0
        path = 0.0
        outcome = "timeout"
        n_ticks = int(math.ceil(c.timeout / dt - 1e-9))
        t = 0.0
        for k in range(n_ticks):
            t = k * dt
            self.hold = False
            pose = Pose(tuple(self.uav.position), self.uav.heading)
            self.frame = render_depth_frame(self.world, pose, self.cam, t)
            report = self.eci.evaluate(self.frame, self.uav.speed)
            self.decide(report)
            if self.want_plan:
                self.want_plan = False
                self.engine.advance(t, self.on_complete, self.on_miss)
                self.trigger_plan()
            busy0 = self.engine.busy_total
            self.release_periodic(t, t + dt)
            self.engine.advance(t + dt, self.on_complete, self.on_miss)
            u = (self.engine.busy_total - busy0) / dt
            self.recent_u.append(u)
            mode = self.monitor.update(t + dt, u)

            prev = self.uav.position
            traj = None if self.hold else self.traj
            self.uav = step_dynamics(self.uav, traj, dt)
            path += float(np.linalg.norm(self.uav.position - prev))
            self.odometer = path
            speeds.append(self.uav.speed)
            utils.append(u)
            ecis.append(report.eci)
            positions.append(self.uav.position.copy())
            f_acc += (self.active.f_per, self.active.f_col, self.active.f_dif)
            res_acc += self.active.res
            if self.want_trace:
                p = self.uav.position
                trace.append((t + dt, p[0], p[1], p[2], self.uav.speed, report.eci, self.active.f_per,
                              self.active.f_col, self.active.f_dif, self.active.res, u))

            if self.world.collides(self.uav.position, c.uav_radius):
                outcome = "collision"
                break
            finished = self.traj is not None and self.uav.arc >= self.traj.total_length - 1e-9
            if np.linalg.norm(self.uav.position - self.goal) <= c.goal_tol and (finished or self.uav.speed < 0.05):
                outcome = "goal"
                break
            if mode is Mode.HOVER:
                outcome = "hover"
                break
            if finished and not self.plan_pending:
                self.want_plan = True
        n = len(speeds)
        flight_time = n * dt
        straight = float(np.linalg.norm(self.goal - np.asarray(self.world.start)))
        speeds = np.asarray(speeds)
        m = EpisodeMetrics(
            world=self.world.tag,
            platform=self.platform.name,
            strategy="",
            seed=self.seed,
            success=outcome == "goal",
            outcome=outcome,
            flight_time=float(flight_time),
            path_length=float(path),
            straight_distance=straight,
            mean_util=float(self.engine.busy_total / flight_time) if flight_time > 0 else 0.0,
            velocity_std=0.0,
            miss_ratio=float(self.engine.miss_ratio),
            jobs=int(self.engine.job_count),
            misses=int(self.engine.miss_count),
            collision_count=int(outcome == "collision"),
            plans=self.plans,
            no_path=self.no_path,
            infeasible_ticks=self.infeasible,
            constraint_violations=self.violations,
            mean_f_per=float(f_acc[0] / n),
            mean_f_col=float(f_acc[1] / n),
            mean_f_dif=float(f_acc[2] / n),
            mean_res=float(res_acc / n),
            dt=dt,
            speeds=speeds,
            utils=np.asarray(utils),
            eci=np.asarray(ecis),
            positions=np.asarray(positions),
            trace=trace if self.want_trace else None,
        )
        m.velocity_std = velocity_std(m, warmup=c.warmup) if n >= 2 else 0.0
        return m


def run_episode(world: World, platform: PlatformModel, strategy: str, config: LoopConfig | None = None,
                seed: int = 0, policy: PolicyParams | None = None, recorder=None, trace: bool = False) -> EpisodeMetrics:
    """Fly one episode and return its metrics.

    ``strategy`` is one of adaptive-rl, adaptive-heuristic, fixed-baseline.
    adaptive-rl requires ``policy`` (CheckpointMissing otherwise); with a
    ``recorder`` it samples actions and logs transitions for training.
    """
    config = config or LoopConfig()
    controller = make_controller(strategy, config, policy, np.random.default_rng(seed), recorder)
    ep = _Episode(world, platform, controller, config, seed, trace)
    metrics = ep.run()
    metrics.strategy = strategy
    if recorder is not None:
        recorder.finish(ep, metrics)
    return metrics


def episode_rewards(ctx, raw: TaskConfig, weights: RewardWeights):
    """Per-decision reward for a raw (pre-projection) action."""
    ep = ctx["episode"]
    wcet = ctx["wcet"]
    c_l = ep.c_l()
    u_total = ep.platform.u_total
    r_c = compute_r_c(raw.f_per * wcet.per, wcet.plan / c_l, raw.f_col * wcet.col, raw.f_dif * wcet.dif, u_total)
    load = config_load(raw, wcet, c_l) / u_total
    return step_reward(r_c, load, weights)


def terminal_reward(ep, metrics: EpisodeMetrics, path_prev: float, weights: RewardWeights) -> float:
    return compute_r_f(ep.goal, ep.uav.position, metrics.path_length, path_prev,
                       metrics.outcome == "collision", weights)


def flown_path_clear(world: World, positions, step: float = 0.1, radius: float = 0.0) -> bool:
    """Post-hoc ground-truth check of the flown polyline, sampled every ``step``."""
    pts = np.asarray(positions)
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
        for f in np.linspace(0.0, 1.0, n + 1):
            if world.collides(a + f * (b - a), radius):
                return False
    return True
