"""One dense-park flight with the fixed baseline and with the adaptive heuristic.

Both runs see the same world and seed. The adaptive run lowers the
navigation workload by choosing coarser maps and lower rates where the
scene allows it.
"""

from adaptnav.loop import run_episode
from adaptnav.scenario import generate_scenario
from adaptnav.scheduler import get_platform

world = generate_scenario("dense-park", seed=0)
platform = get_platform("pi4b")
for strategy in ("fixed-baseline", "adaptive-heuristic"):
    m = run_episode(world, platform, strategy, seed=0)
    print(f"{strategy:18s} {m.outcome:6s} time {m.flight_time:5.2f} s  path {m.path_length:5.1f} m  "
          f"utilization {m.mean_util:.3f}  velocity std {m.velocity_std:.3f}  mean res {m.mean_res:.2f} m  "
          f"f_per {m.mean_f_per:5.1f} Hz  misses {m.misses}/{m.jobs}")
