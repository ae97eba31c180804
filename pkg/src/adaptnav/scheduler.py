"""Global EDF execution model for the navigation task set.

Two simulators share one semantics (implicit deadlines, preemptive global
EDF, ties broken by task order then release, a job still unfinished at its
deadline is counted as a miss and dropped):

* :func:`simulate_edf` advances in fixed ticks and keeps per-tick records;
* :class:`EdfEngine` is event driven and is what the flight loop uses, since
  jobs arrive at arbitrary instants there.
"""

from __future__ import annotations

import csv
import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

TASK_ORDER = ("per", "plan", "col", "dif")


@dataclass(frozen=True)
class PlatformModel:
    name: str
    cores: int
    speed: float = 1.0

    def __post_init__(self):
        if self.cores < 1:
            raise ValueError("need at least one core")
        if self.speed <= 0:
            raise ValueError("speed must be positive")

    @property
    def u_total(self) -> float:
        return float(self.cores)


# relative speed from theoretical GFLOPS, OrangePi 5 (19.2) as the reference
PLATFORMS = {
    "orangepi5": PlatformModel("orangepi5", 4, 1.0),
    "xavier-nx": PlatformModel("xavier-nx", 6, 16.8 / 19.2),
    "x86": PlatformModel("x86", 2, 16.6 / 19.2),
    "tx2": PlatformModel("tx2", 4, 16.0 / 19.2),
    "pi4b": PlatformModel("pi4b", 4, 14.4 / 19.2),
}


def get_platform(name: str) -> PlatformModel:
    try:
        return PLATFORMS[name]
    except KeyError:
        raise ValueError(f"unknown platform {name!r}; choose from {', '.join(PLATFORMS)}") from None


@dataclass(frozen=True)
class Task:
    id: str
    wcet: float
    period: float

    def __post_init__(self):
        if self.wcet <= 0 or self.period <= 0:
            raise ValueError("wcet and period must be positive")

    @property
    def deadline(self) -> float:
        return self.period

    @property
    def utilization(self) -> float:
        return self.wcet / self.period


def admit(tasks, platform: PlatformModel) -> bool:
    """Utilization test: admit iff the total utilization fits the core count."""
    return sum(t.utilization for t in tasks) <= platform.u_total + 1e-12


@dataclass
class JobRecord:
    task: int
    release: float
    deadline: float
    completion: float | None = None
    missed: bool = False
    intervals: list = field(default_factory=list)


@dataclass
class ScheduleTrace:
    tick: float
    jobs: list
    running: np.ndarray  # (ticks, cores) task index or -1
    ready: np.ndarray  # ready-job count at each tick
    busy: np.ndarray  # per-task busy ticks
    u_cur: np.ndarray  # busy cores per tick

    @property
    def job_count(self) -> int:
        return len(self.jobs)

    @property
    def miss_count(self) -> int:
        return sum(j.missed for j in self.jobs)

    @property
    def miss_ratio(self) -> float:
        return self.miss_count / self.job_count if self.jobs else 0.0

    def busy_fraction(self) -> np.ndarray:
        n = len(self.running)
        return self.busy / n if n else self.busy * 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            cores = self.running.shape[1] if self.running.ndim == 2 else 0
            out.writerow(["tick"] + [f"core{c}" for c in range(cores)] + ["U_cur"])
            for k in range(len(self.running)):
                out.writerow([k] + [int(x) for x in self.running[k]] + [int(self.u_cur[k])])


def _ticks(value, tick, what):
    n = value / tick
    k = round(n)
    if abs(n - k) > 1e-9 * max(1.0, abs(n)):
        raise ValueError(f"tick {tick} does not divide {what} {value}")
    return int(k)


def simulate_edf(tasks, platform: PlatformModel, horizon: float, tick: float = 1e-3) -> ScheduleTrace:
    """Tick-level global EDF over synchronous periodic releases from t=0.

    Only jobs whose deadline falls within the horizon are judged.
    """
    tasks = list(tasks)
    n_cores = platform.cores
    if not tasks:
        n = int(math.floor(horizon / tick + 1e-9))
        return ScheduleTrace(tick, [], np.full((n, n_cores), -1), np.zeros(n, int), np.zeros(0), np.zeros(n, int))
    if tick > min(t.wcet for t in tasks) / 4 + 1e-15:
        raise ValueError("tick must be at most a quarter of the smallest WCET")
    periods = [_ticks(t.period, tick, "period") for t in tasks]
    if horizon < max(t.period for t in tasks) - 1e-12:
        raise ValueError("horizon shorter than the longest period")
    n = int(math.floor(horizon / tick + 1e-9))
    work = [t.wcet / tick for t in tasks]

    jobs: list[JobRecord] = []
    active: list[tuple[JobRecord, list]] = []  # (record, [remaining])
    running = np.full((n, n_cores), -1, dtype=int)
    ready = np.zeros(n, dtype=int)
    busy = np.zeros(len(tasks))
    for k in range(n):
        # deadlines first, then releases
        still = []
        for rec, rem in active:
            if rem[0] > 1e-9 and rec.deadline <= k:
                rec.missed = True
            elif rem[0] > 1e-9:
                still.append((rec, rem))
        active = still
        for i, p in enumerate(periods):
            if k % p == 0:
                rec = JobRecord(i, k, k + p)
                if k + p <= n:
                    jobs.append(rec)
                active.append((rec, [work[i]]))
        active.sort(key=lambda a: (a[0].deadline, a[0].task, a[0].release))
        ready[k] = len(active)
        for c, (rec, rem) in enumerate(active[:n_cores]):
            running[k, c] = rec.task
            busy[rec.task] += 1
            if rec.intervals and rec.intervals[-1][1] == k:
                rec.intervals[-1][1] = k + 1
            else:
                rec.intervals.append([k, k + 1])
            rem[0] -= 1.0
            if rem[0] <= 1e-9:
                rec.completion = k + 1
        active = [a for a in active if a[1][0] > 1e-9]
    # jobs still pending at the end with a deadline inside the horizon
    for rec, rem in active:
        if rec.deadline <= n:
            rec.missed = True
    for rec in jobs:
        rec.release *= tick
        rec.deadline *= tick
        if rec.completion is not None:
            rec.completion *= tick
        rec.intervals = [(a * tick, b * tick) for a, b in rec.intervals]
    u_cur = (running >= 0).sum(axis=1)
    return ScheduleTrace(tick, jobs, running, ready, busy, u_cur)


class Mode(enum.Enum):
    NORMAL = "normal"
    HOVER = "hover"


class FailsafeMonitor:
    """Latching overload detector over a trailing window of U_cur samples."""

    def __init__(self, u_total, window=2.0, threshold=1.0, hysteresis=0.05):
        if window <= 0:
            raise ValueError("window must be positive")
        self.u_total = u_total
        self.window = window
        self.threshold = threshold
        self.hysteresis = hysteresis
        self._samples: deque = deque()
        self._sum = 0.0
        self._first = None
        self.mode = Mode.NORMAL

    def update(self, t: float, u_cur: float) -> Mode:
        if self._first is None:
            self._first = t
        self._samples.append((t, u_cur))
        self._sum += u_cur
        while self._samples and self._samples[0][0] <= t - self.window + 1e-12:
            self._sum -= self._samples.popleft()[1]
        full = t - self._first >= self.window - 1e-12
        mean = self._sum / len(self._samples)
        if self.mode is Mode.NORMAL:
            if full and mean > self.threshold * self.u_total:
                self.mode = Mode.HOVER
        elif mean < (self.threshold - self.hysteresis) * self.u_total:
            self.mode = Mode.NORMAL
        return self.mode

    def mean(self) -> float:
        return self._sum / len(self._samples) if self._samples else 0.0


def failsafe_monitor(u_series, dt, u_total, window=2.0, threshold=1.0, hysteresis=0.05) -> Mode:
    """Replay a sampled U_cur series and report the final mode."""
    mon = FailsafeMonitor(u_total, window, threshold, hysteresis)
    mode = Mode.NORMAL
    for k, u in enumerate(u_series):
        mode = mon.update(k * dt, u)
    return mode


# ---------------------------------------------------------------------------
# event-driven engine


@dataclass
class Job:
    task: str
    release: float
    deadline: float
    remaining: float
    seq: int
    payload: object = None
    completion: float | None = None
    missed: bool = False

    def key(self):
        return (self.deadline, TASK_ORDER.index(self.task) if self.task in TASK_ORDER else 99, self.release, self.seq)


class EdfEngine:
    """Event-driven preemptive global EDF on ``cores`` identical processors.

    Jobs are released explicitly; :meth:`advance` runs the processors up to a
    time and hands every completed job to a callback, which may release new
    jobs at the completion instant.
    """

    def __init__(self, cores: int):
        self.cores = cores
        self.now = 0.0
        self.active: list[Job] = []
        self._seq = 0
        self.job_count = 0
        self.miss_count = 0
        self.busy: dict[str, float] = {t: 0.0 for t in TASK_ORDER}
        self.busy_total = 0.0

    def release(self, task: str, wcet: float, deadline: float, payload=None) -> Job:
        job = Job(task, self.now, deadline, wcet, self._seq, payload)
        self._seq += 1
        self.active.append(job)
        return job

    def pending(self, task: str) -> bool:
        return any(j.task == task for j in self.active)

    def _drop_missed(self):
        keep = []
        for j in self.active:
            if j.deadline <= self.now + 1e-12:
                j.missed = True
                self.miss_count += 1
                self.job_count += 1
            else:
                keep.append(j)
        self.active = keep

    def advance(self, until: float, on_complete=None, on_miss=None) -> None:
        while True:
            self._drop_missed_cb(on_miss)
            if self.now >= until - 1e-12:
                self.now = max(self.now, until)
                return
            self.active.sort(key=Job.key)
            run = self.active[: self.cores]
            horizon = until
            for j in run:
                horizon = min(horizon, self.now + j.remaining)
            for j in self.active:
                horizon = min(horizon, j.deadline)
            dt = horizon - self.now
            if dt > 0:
                for j in run:
                    j.remaining -= dt
                    self.busy[j.task] = self.busy.get(j.task, 0.0) + dt
                    self.busy_total += dt
            self.now = horizon
            done = [j for j in run if j.remaining <= 1e-12]
            if done:
                self.active = [j for j in self.active if j.remaining > 1e-12]
                for j in done:
                    j.completion = self.now
                    self.job_count += 1
                    if on_complete is not None:
                        on_complete(j)

    def _drop_missed_cb(self, on_miss):
        if not any(j.deadline <= self.now + 1e-12 for j in self.active):
            return
        missed = [j for j in self.active if j.deadline <= self.now + 1e-12]
        self._drop_missed()
        if on_miss is not None:
            for j in missed:
                on_miss(j)

    @property
    def miss_ratio(self) -> float:
        return self.miss_count / self.job_count if self.job_count else 0.0
