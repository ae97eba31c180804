"""Global EDF on a simulated multicore and the overload failsafe."""

from adaptnav.scheduler import FailsafeMonitor, Task, get_platform, simulate_edf

pi = get_platform("pi4b")
tasks = [Task("perception", 0.027, 1 / 20), Task("planning", 0.16, 1.0), Task("collision", 0.0067, 1 / 10),
         Task("diff", 0.004, 1 / 5)]
tr = simulate_edf(tasks, pi, horizon=4.0, tick=0.001)
print(f"{pi.name}: {tr.job_count} jobs, {tr.miss_count} missed, per-core busy {tr.busy_fraction().round(3)}")

overload = tasks + [Task(f"hog{i}", 0.95, 1.0) for i in range(4)]
tr = simulate_edf(overload, pi, horizon=4.0, tick=0.001)
print(f"with four extra 95% tasks: miss ratio {tr.miss_ratio:.3f}")

mon = FailsafeMonitor(u_total=pi.u_total)
t = 0.0
for u in [2.0] * 30 + [4.1] * 90 + [3.0] * 90:
    mode = mon.update(t, u)
    t += 1 / 30
    if round(t * 30) % 30 == 0:
        print(f"t={t:4.1f}s utilization={u:.1f} mode={mode.name}")
