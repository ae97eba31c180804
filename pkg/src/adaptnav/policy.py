"""Frequency adapter: actor-critic MLP, PPO update, rewards, heuristic fallback.

The network maps a compact system state (complexity index and its change,
constraint flags, current frequencies, motion, utilization, goal) to three
categorical distributions, one per adaptable task frequency. Everything is
plain numpy with hand-written backpropagation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from adaptnav.strategy import FrequencyBounds, TaskConfig, project_config

F_PER_GRID = (1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0)
F_COL_GRID = (0.0, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0)
F_DIF_GRID = (1.0, 2.0, 5.0, 10.0, 15.0, 30.0)
DEFAULT_GRIDS = (F_PER_GRID, F_COL_GRID, F_DIF_GRID)

HIDDEN = 150
OBS_DIM = 15
CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class Normalizer:
    f_scale: tuple[float, float, float] = (30.0, 20.0, 30.0)
    v_max: float = 2.0
    u_total: float = 4.0
    dist_scale: float = 40.0

    def as_dict(self):
        return {"f_scale": list(self.f_scale), "v_max": self.v_max, "u_total": self.u_total,
                "dist_scale": self.dist_scale}


@dataclass(frozen=True)
class PolicyState:
    eci: float
    abs_delta_eci: float
    status: tuple[bool, bool, bool, bool]
    f_cur: tuple[float, float, float]
    speed: float
    u_cur: float
    goal_dir: tuple[float, float, float]
    goal_dist: float

    def vector(self, norm: Normalizer = Normalizer()) -> np.ndarray:
        v = np.empty(OBS_DIM)
        v[0] = _clip01(self.eci)
        v[1] = _clip01(abs(self.abs_delta_eci))
        v[2:6] = [float(bool(s)) for s in self.status]
        v[6:9] = [_clip01(f / s) for f, s in zip(self.f_cur, norm.f_scale)]
        v[9] = _clip01(self.speed / norm.v_max)
        v[10] = _clip01(self.u_cur / norm.u_total)
        g = np.asarray(self.goal_dir, dtype=float)
        n = np.linalg.norm(g)
        v[11:14] = g / n if n > 0 else 0.0
        v[14] = _clip01(self.goal_dist / norm.dist_scale)
        return v


def _clip01(x):
    x = float(x)
    if not math.isfinite(x):
        return 0.0
    return min(max(x, 0.0), 1.0)


# ---------------------------------------------------------------------------
# network


def _glorot(rng, fan_in, fan_out):
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


@dataclass
class PolicyParams:
    """Actor and critic weights. Each network is obs -> h -> h -> out with tanh."""

    actor: list  # [W1, b1, W2, b2, W3, b3]
    critic: list
    heads: tuple[int, ...]
    grids: tuple = DEFAULT_GRIDS
    norm: Normalizer = field(default_factory=Normalizer)

    @classmethod
    def init(cls, rng, obs_dim=OBS_DIM, hidden=HIDDEN, grids=DEFAULT_GRIDS, norm=None):
        heads = tuple(len(g) for g in grids)
        n_out = sum(heads)

        def net(out, zero_last):
            W3 = np.zeros((hidden, out)) if zero_last else _glorot(rng, hidden, out)
            return [_glorot(rng, obs_dim, hidden), np.zeros(hidden),
                    _glorot(rng, hidden, hidden), np.zeros(hidden), W3, np.zeros(out)]

        actor = net(n_out, True)
        critic = net(1, False)
        return cls(actor, critic, heads, tuple(tuple(g) for g in grids), norm or Normalizer())

    def arrays(self):
        return self.actor + self.critic

    def copy(self):
        return PolicyParams([a.copy() for a in self.actor], [c.copy() for c in self.critic],
                            self.heads, self.grids, self.norm)


def _mlp_forward(layers, x):
    W1, b1, W2, b2, W3, b3 = layers
    h1 = np.tanh(x @ W1 + b1)
    h2 = np.tanh(h1 @ W2 + b2)
    out = h2 @ W3 + b3
    return out, (x, h1, h2)


def _mlp_backward(layers, cache, dout):
    W1, b1, W2, b2, W3, b3 = layers
    x, h1, h2 = cache
    gW3 = h2.T @ dout
    gb3 = dout.sum(axis=0)
    dh2 = (dout @ W3.T) * (1 - h2**2)
    gW2 = h1.T @ dh2
    gb2 = dh2.sum(axis=0)
    dh1 = (dh2 @ W2.T) * (1 - h1**2)
    gW1 = x.T @ dh1
    gb1 = dh1.sum(axis=0)
    return [gW1, gb1, gW2, gb2, gW3, gb3]


def _split_softmax(logits, heads):
    probs = []
    logps = []
    o = 0
    for h in heads:
        z = logits[:, o : o + h]
        z = z - z.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
        lp = z - lse
        logps.append(lp)
        probs.append(np.exp(lp))
        o += h
    return probs, logps


def policy_forward(state, params: PolicyParams):
    """Action distributions (one array per head) and value estimate for one state."""
    x = state.vector(params.norm) if isinstance(state, PolicyState) else np.asarray(state, dtype=float)
    logits, _ = _mlp_forward(params.actor, x[None, :])
    probs, _ = _split_softmax(logits, params.heads)
    value, _ = _mlp_forward(params.critic, x[None, :])
    return [p[0] for p in probs], float(value[0, 0])


def sample_action(dists, rng) -> tuple[int, ...]:
    """Draw one index per head. ``rng`` is a numpy Generator or a seed."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    out = []
    for p in dists:
        c = np.cumsum(p)
        u = rng.random() * c[-1]
        out.append(int(min(np.searchsorted(c, u, side="right"), len(p) - 1)))
    return tuple(out)


def greedy_action(dists) -> tuple[int, ...]:
    return tuple(int(np.argmax(p)) for p in dists)


def action_frequencies(action, grids=DEFAULT_GRIDS):
    return tuple(float(g[a]) for g, a in zip(grids, action))


# ---------------------------------------------------------------------------
# rewards


@dataclass(frozen=True)
class RewardWeights:
    w_a: float = -0.1
    w_s: float = 1.0
    w_col: float = -100.0
    lam: float = 1.0
    w_util: float = 1.0
    raw_sum: bool = False


def compute_r_c(u_per, u_plan, u_col, u_dif, u_total) -> float:
    """Signed utilization excess over capacity."""
    return u_per + u_plan + u_col + u_dif - u_total


def compute_r_f(goal, pos_e, path_e, path_prev, collided, weights: RewardWeights = RewardWeights()) -> float:
    """Flight reward: distance to target, path-length change, collision indicator."""
    if path_prev <= 0:
        raise ValueError("path_prev must be positive")
    dist = float(np.linalg.norm(np.asarray(goal, dtype=float) - np.asarray(pos_e, dtype=float)))
    return weights.w_a * dist + weights.w_s * (1 - path_e / path_prev) + weights.w_col * float(bool(collided))


def step_reward(r_c, load_fraction, weights: RewardWeights = RewardWeights()) -> float:
    """Per-decision reward from the utilization terms.

    ``load_fraction`` is the navigation load of the chosen configuration over
    capacity. In raw-sum mode the signed excess is added as is.
    """
    if weights.raw_sum:
        return r_c
    return -weights.lam * max(0.0, r_c) - weights.w_util * load_fraction


# ---------------------------------------------------------------------------
# PPO


@dataclass(frozen=True)
class PPOConfig:
    clip: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    lr: float = 3e-4
    batch_steps: int = 2048
    epochs: int = 10
    minibatch: int = 256
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    max_grad_norm: float = 0.5


@dataclass
class Batch:
    obs: np.ndarray  # (B, D)
    actions: np.ndarray  # (B, heads) int
    old_logp: np.ndarray  # (B,)
    advantages: np.ndarray  # (B,)
    returns: np.ndarray  # (B,)

    def __len__(self):
        return len(self.obs)

    def subset(self, idx):
        return Batch(self.obs[idx], self.actions[idx], self.old_logp[idx], self.advantages[idx], self.returns[idx])


def log_prob(params: PolicyParams, obs, actions):
    logits, _ = _mlp_forward(params.actor, obs)
    _, logps = _split_softmax(logits, params.heads)
    rows = np.arange(len(obs))
    return sum(lp[rows, actions[:, h]] for h, lp in enumerate(logps))


def ppo_loss_and_grad(params: PolicyParams, batch: Batch, cfg: PPOConfig = PPOConfig()):
    """Clipped surrogate + value + entropy loss and its gradient.

    Returns (loss, grads, info) with grads ordered like ``params.arrays()``.
    """
    B = len(batch)
    rows = np.arange(B)
    logits, a_cache = _mlp_forward(params.actor, batch.obs)
    probs, logps = _split_softmax(logits, params.heads)
    logp = sum(lp[rows, batch.actions[:, h]] for h, lp in enumerate(logps))
    ratio = np.exp(logp - batch.old_logp)
    A = batch.advantages
    unclipped = ratio * A
    clipped = np.clip(ratio, 1 - cfg.clip, 1 + cfg.clip) * A
    surrogate = np.minimum(unclipped, clipped)
    active = unclipped <= clipped
    entropy = sum(-(p * lp).sum(axis=1) for p, lp in zip(probs, logps))

    value, c_cache = _mlp_forward(params.critic, batch.obs)
    v = value[:, 0]
    v_err = v - batch.returns

    loss = -surrogate.mean() + cfg.vf_coef * 0.5 * np.mean(v_err**2) - cfg.ent_coef * entropy.mean()

    dlogp = -(ratio * A * active) / B
    dlogits = np.empty_like(logits)
    o = 0
    for h, (p, lp) in enumerate(zip(probs, logps)):
        n = params.heads[h]
        onehot = np.zeros_like(p)
        onehot[rows, batch.actions[:, h]] = 1.0
        H = -(p * lp).sum(axis=1, keepdims=True)
        d_ent = -p * (lp + H)
        dlogits[:, o : o + n] = dlogp[:, None] * (onehot - p) - (cfg.ent_coef / B) * d_ent
        o += n
    g_actor = _mlp_backward(params.actor, a_cache, dlogits)
    dv = (cfg.vf_coef * v_err / B)[:, None]
    g_critic = _mlp_backward(params.critic, c_cache, dv)
    info = {
        "policy_loss": float(-surrogate.mean()),
        "value_loss": float(0.5 * np.mean(v_err**2)),
        "entropy": float(entropy.mean()),
        "clip_frac": float(np.mean(~active)),
    }
    return float(loss), g_actor + g_critic, info


class Adam:
    def __init__(self, params: PolicyParams, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.b1 = beta1
        self.b2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.t = 0

    def step(self, params: PolicyParams, grads):
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for a, g, m, v in zip(params.arrays(), grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def update_policy(batch: Batch, params: PolicyParams, opt: Adam, cfg: PPOConfig = PPOConfig(), rng=None):
    """Run ``cfg.epochs`` passes of minibatch PPO over one batch, in place.

    Raises FloatingPointError (leaving ``params`` untouched for that
    minibatch) if a gradient norm is not finite.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    if not np.all(np.isfinite(batch.advantages)):
        raise FloatingPointError("non-finite advantages")
    rng = np.random.default_rng(rng)
    n = len(batch)
    mb = min(cfg.minibatch, n)
    stats = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for s in range(0, n, mb):
            sub = batch.subset(order[s : s + mb])
            adv = sub.advantages
            if len(adv) > 1:
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            sub = Batch(sub.obs, sub.actions, sub.old_logp, adv, sub.returns)
            loss, grads, info = ppo_loss_and_grad(params, sub, cfg)
            norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
            if not math.isfinite(norm) or not math.isfinite(loss):
                raise FloatingPointError(f"non-finite gradient norm ({norm}) or loss ({loss})")
            if norm > cfg.max_grad_norm:
                grads = [g * (cfg.max_grad_norm / norm) for g in grads]
            opt.step(params, grads)
            info["loss"] = loss
            info["grad_norm"] = norm
            stats.append(info)
    return {k: float(np.mean([s[k] for s in stats])) for k in stats[0]}


def compute_gae(rewards, values, dones, last_value, gamma=0.99, lam=0.95):
    """Generalized advantage estimates and returns for one rollout buffer."""
    T = len(rewards)
    adv = np.zeros(T)
    gae = 0.0
    for t in range(T - 1, -1, -1):
        next_v = last_value if t == T - 1 else values[t + 1]
        nonterminal = 1.0 - float(dones[t])
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        gae = delta + gamma * lam * nonterminal * gae
        adv[t] = gae
    return adv, adv + np.asarray(values)


# ---------------------------------------------------------------------------
# heuristic


def heuristic_policy(state: PolicyState, bounds: FrequencyBounds, res: float) -> TaskConfig:
    """Piecewise-linear map from complexity to frequencies, then projected."""
    eci = _clip01(state.eci)
    f_per = bounds.f_per_min + eci * (bounds.f_per_max - bounds.f_per_min)
    f_col = min(f_per, bounds.f_col_max * eci)
    f_dif = bounds.f_dif_max * min(max(abs(state.abs_delta_eci) * 5, 0.1), 1.0)
    return project_config(TaskConfig(f_per, f_col, f_dif, res), bounds)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: PolicyParams, path, meta=None) -> None:
    names = ["W1", "b1", "W2", "b2", "W3", "b3"]
    layers = {}
    for prefix, net in (("actor", params.actor), ("critic", params.critic)):
        for name, arr in zip(names, net):
            layers[f"{prefix}.{name}"] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    doc = {
        "format": CHECKPOINT_FORMAT,
        "kind": "adaptnav-policy",
        "grids": [list(g) for g in params.grids],
        "norm": params.norm.as_dict(),
        "heads": list(params.heads),
        "meta": meta or {},
        "layers": layers,
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path, grids=DEFAULT_GRIDS) -> PolicyParams:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("kind") != "adaptnav-policy":
        raise ValueError(f"{path}: not a policy checkpoint of format {CHECKPOINT_FORMAT}")
    stored = tuple(tuple(float(x) for x in g) for g in doc["grids"])
    if grids is not None and stored != tuple(tuple(float(x) for x in g) for g in grids):
        raise ValueError(f"{path}: action grids {stored} do not match the configured grids")
    names = ["W1", "b1", "W2", "b2", "W3", "b3"]

    def net(prefix):
        out = []
        for name in names:
            rec = doc["layers"][f"{prefix}.{name}"]
            out.append(np.asarray(rec["data"], dtype=float).reshape(rec["shape"]))
        return out

    n = doc["norm"]
    norm = Normalizer(tuple(n["f_scale"]), n["v_max"], n["u_total"], n["dist_scale"])
    return PolicyParams(net("actor"), net("critic"), tuple(doc["heads"]), stored, norm)
