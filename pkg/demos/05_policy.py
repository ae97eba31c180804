"""The frequency policy: heuristic fallback and a tiny PPO run.

The heuristic maps the complexity index straight to frequencies. The PPO
part trains the same network code on a two-state toy problem where the
right action depends on the state, which shows the update converging.
"""

import numpy as np

from adaptnav.policy import (
    Adam,
    Batch,
    PolicyParams,
    PolicyState,
    PPOConfig,
    heuristic_policy,
    log_prob,
    policy_forward,
    sample_action,
    update_policy,
)
from adaptnav.strategy import Wcet, feasible_bounds

bounds = feasible_bounds(12.0, 30.0, Wcet(0.027, 0.16, 0.0067, 0.004), 4)
for eci, delta in [(0.0, 0.0), (0.3, 0.02), (0.7, 0.1), (1.0, 0.3)]:
    s = PolicyState(eci, delta, (True, True, True, True), (10.0, 5.0, 2.0), 1.5, 1.0, (1.0, 0.0, 0.0), 20.0)
    cfg = heuristic_policy(s, bounds, res=0.2)
    print(f"eci={eci:.1f} |d|={delta:.2f} -> f_per {cfg.f_per:5.2f}  f_col {cfg.f_col:5.2f}  f_dif {cfg.f_dif:5.2f}")

rng = np.random.default_rng(0)
params = PolicyParams.init(rng, obs_dim=2, hidden=8, grids=((0.0, 1.0),))
opt = Adam(params, lr=1e-2)
states = np.eye(2)
for update in range(301):
    obs = states[rng.integers(0, 2, 64)]
    acts = np.array([[sample_action(policy_forward(o, params)[0], rng)[0]] for o in obs])
    reward = np.where(acts[:, 0] == obs[:, 0], 1.0, -1.0)  # state 0 wants action 1, state 1 wants action 0
    update_policy(Batch(obs, acts, log_prob(params, obs, acts), reward, reward), params, opt,
                  PPOConfig(epochs=1, minibatch=64, ent_coef=0.0), rng=update)
    if update % 50 == 0:
        p = [policy_forward(s, params)[0][0][1 - i] for i, s in enumerate(states)]
        print(f"update {update:3d}: P(correct) = {p[0]:.3f}, {p[1]:.3f}")
