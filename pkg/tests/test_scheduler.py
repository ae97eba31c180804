import math

import numpy as np
import pytest

from adaptnav.scheduler import (
    TASK_ORDER,
    EdfEngine,
    FailsafeMonitor,
    Mode,
    PlatformModel,
    Task,
    admit,
    failsafe_monitor,
    get_platform,
    simulate_edf,
)

ONE = PlatformModel("one", 1)


def _util_tasks(us):
    return [Task(f"t{i}", u, 1.0) for i, u in enumerate(us)]


def test_admit_examples():
    assert admit(_util_tasks([0.4, 0.5]), ONE)
    assert not admit(_util_tasks([0.6, 0.6]), ONE)
    assert admit(_util_tasks([0.9] * 4), PlatformModel("four", 4))


def test_platform_roster():
    assert get_platform("orangepi5").speed == 1.0
    assert get_platform("pi4b").speed == pytest.approx(0.75)
    assert get_platform("xavier-nx").speed == pytest.approx(0.875)
    for p in ("tx2", "x86"):
        assert get_platform(p).u_total == get_platform(p).cores
    with pytest.raises(ValueError):
        get_platform("cray")


def test_single_task_schedule():
    tr = simulate_edf([Task("a", 1.0, 2.0)], ONE, 10.0, tick=0.25)
    assert tr.job_count == 5 and tr.miss_count == 0
    assert tr.busy_fraction()[0] == pytest.approx(0.5)
    assert [j.completion for j in tr.jobs] == [1.0, 3.0, 5.0, 7.0, 9.0]


def test_two_tasks_on_one_core():
    tr = simulate_edf([Task("a", 1.0, 2.0), Task("b", 1.0, 3.0)], ONE, 6.0, tick=0.25)
    assert tr.miss_count == 0 and tr.job_count == 5


def test_empty_task_set():
    tr = simulate_edf([], ONE, 5.0)
    assert tr.job_count == 0 and tr.miss_count == 0 and tr.miss_ratio == 0.0


def test_overload_misses_and_rejects_coarse_tick():
    tr = simulate_edf([Task("a", 1.0, 2.0), Task("b", 1.5, 2.0)], ONE, 20.0, tick=0.25)
    assert tr.miss_count > 0
    with pytest.raises(ValueError, match="quarter"):
        simulate_edf([Task("a", 1.0, 2.0)], ONE, 10.0, tick=0.5)


def _random_set(rng, budget):
    periods = [8, 10, 12, 15, 16, 20, 24, 30, 40]
    tasks = []
    u = 0.0
    for i in range(int(rng.integers(1, 5))):
        p = int(rng.choice(periods))
        c = int(rng.integers(4, p + 1))
        if u + c / p > budget:
            break
        u += c / p
        tasks.append(Task(f"t{i}", float(c), float(p)))
    return tasks or [Task("t0", 4.0, 8.0)]


def _work_conserving(tr, cores):
    busy = (tr.running >= 0).sum(axis=1)
    return np.all(busy == np.minimum(cores, tr.ready))


def test_single_core_edf_is_optimal():
    rng = np.random.default_rng(0)
    for _ in range(500):
        tasks = _random_set(rng, 1.0)
        hyper = math.lcm(*(int(t.period) for t in tasks))
        tr = simulate_edf(tasks, ONE, float(hyper), tick=1.0)
        assert tr.miss_count == 0
        assert _work_conserving(tr, 1)


def test_work_conservation_on_multicore():
    rng = np.random.default_rng(1)
    quad = PlatformModel("q", 4)
    for _ in range(100):
        tasks = []
        for i in range(int(rng.integers(3, 9))):
            p = int(rng.choice([8, 10, 12, 20]))
            tasks.append(Task(f"t{i}", float(rng.integers(4, p + 1)), float(p)))
        tr = simulate_edf(tasks, quad, 240.0, tick=1.0)
        assert _work_conserving(tr, 4)
        # a task has one live job at a time, so no task may hold two cores in a tick
        for row in tr.running:
            live = row[row >= 0]
            assert len(live) == len(set(live.tolist()))


def test_busy_fraction_tracks_utilization():
    tasks = [Task("a", 0.004, 0.02), Task("b", 0.005, 0.05), Task("c", 0.012, 0.1)]
    tr = simulate_edf(tasks, ONE, 10.0, tick=0.001)  # >= 100 periods of the slowest task
    for frac, t in zip(tr.busy_fraction(), tasks):
        assert abs(frac - t.utilization) <= 0.01 * t.utilization


def test_simulation_is_deterministic():
    tasks = [Task("a", 1.0, 4.0), Task("b", 2.0, 5.0), Task("c", 1.0, 3.0)]
    a = simulate_edf(tasks, PlatformModel("d", 2), 60.0, tick=0.25)
    b = simulate_edf(tasks, PlatformModel("d", 2), 60.0, tick=0.25)
    np.testing.assert_array_equal(a.running, b.running)
    assert [(j.completion, j.missed) for j in a.jobs] == [(j.completion, j.missed) for j in b.jobs]


def test_failsafe_examples():
    assert failsafe_monitor([1.2] * 500, 0.01, 4.0) is Mode.NORMAL
    assert failsafe_monitor([4.2] * 300, 0.01, 4.0) is Mode.HOVER
    spike = [0.0] * 300
    spike[150] = 10.0
    assert failsafe_monitor(spike, 0.01, 1.0) is Mode.NORMAL


def test_failsafe_needs_full_window_and_has_hysteresis():
    mon = FailsafeMonitor(1.0, window=1.0)
    modes = [mon.update(k * 0.1, 2.0) for k in range(11)]
    assert modes[:10] == [Mode.NORMAL] * 10 and modes[10] is Mode.HOVER
    # mean just below the threshold but above the hysteresis band stays latched
    for k in range(11, 40):
        m = mon.update(k * 0.1, 0.97)
    assert m is Mode.HOVER
    for k in range(40, 60):
        m = mon.update(k * 0.1, 0.5)
    assert m is Mode.NORMAL


def _engine_run(tasks, cores, horizon):
    eng = EdfEngine(cores)
    done = []
    releases = sorted({k * t.period for t in tasks for k in range(int(horizon // t.period) + 1)})
    for r in releases:
        eng.advance(r, on_complete=done.append)
        for t in tasks:
            if abs(r / t.period - round(r / t.period)) < 1e-9 and r < horizon:
                eng.release(t.id, t.wcet, r + t.period)
    eng.advance(horizon, on_complete=done.append)
    return eng, {(j.task, j.release): j.completion for j in done}


def test_event_engine_matches_tick_simulation():
    rng = np.random.default_rng(2)
    for cores in (1, 2, 3):
        for _ in range(40):
            tasks = []
            for name in TASK_ORDER[: int(rng.integers(2, 5))]:
                p = int(rng.choice([8, 10, 12, 16, 20]))
                tasks.append(Task(name, float(rng.integers(4, p)), float(p)))
            horizon = 240.0
            tr = simulate_edf(tasks, PlatformModel("x", cores), horizon, tick=1.0)
            eng, completions = _engine_run(tasks, cores, horizon)
            for j in tr.jobs:
                key = (tasks[j.task].id, j.release)
                if j.missed:
                    assert key not in completions
                else:
                    assert completions[key] == pytest.approx(j.completion, abs=1e-9)
            assert eng.miss_count == tr.miss_count


def test_trace_csv_export(tmp_path):
    tr = simulate_edf([Task("a", 1.0, 2.0)], PlatformModel("two", 2), 4.0, tick=0.25)
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "tick,core0,core1,U_cur"
    assert len(rows) == 17
    assert rows[1] == "0,0,-1,1"
