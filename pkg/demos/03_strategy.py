"""Resolution choice, path scoring and the admissible frequency region."""

from adaptnav.strategy import TaskConfig, Wcet, assess_path, feasible_bounds, project_config, select_resolution

origin = (0.0, 0.0, 0.0)
for goal in [(40.0, 0.0, 1.5), (0.6, 0.0, 1.5), (0.15, 0.0, 1.5)]:
    res = select_resolution(origin, (0.05, 0.0, 1.5), goal)
    print(f"start->goal {goal[0]:5.2f} m apart: coarsest usable resolution {res} m")
print("escalated after a collision alarm:", select_resolution(origin, (0.05, 0.0, 1.5), (40.0, 0.0, 1.5), escalate=True))

# a detour scores lower, and more clutter raises the reference length
for occupied in (0, 2000, 8000):
    a = assess_path(L_len=34.0, L_bar=28.0, rho_c=occupied, rho_c_star=20000)
    print(f"occupied cells {occupied:5d}: reference {a.L_star:5.2f} m, score {a.score:.3f}")

# four cores, one already half loaded by other work
wcet = Wcet(per=0.027, plan=0.16, col=0.0067, dif=0.004)
bounds = feasible_bounds(c_l=12.0, f_sen=30.0, wcet=wcet, n_cores=4, u_cur=2.9, u_total=4.0)
print(f"f_per in [{bounds.f_per_min:.3f}, {bounds.f_per_max}], load limit {bounds.load_limit:.3f}")
wish = TaskConfig(30.0, 30.0, 30.0, 0.1)
got = project_config(wish, bounds)
print(f"requested {wish.freqs()} -> admitted ({got.f_per:.2f}, {got.f_col:.2f}, {got.f_dif:.2f})"
      f" using load {bounds.load(got.f_per, got.f_col, got.f_dif):.3f}")

tight = feasible_bounds(c_l=0.02, f_sen=30.0, wcet=wcet, n_cores=4)
print("a 20 ms flight leaves no room:", tight.feasible, "-", tight.reason)
