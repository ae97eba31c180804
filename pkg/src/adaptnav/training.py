"""PPO training of the frequency policy on generated scenarios."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from adaptnav.loop import LoopConfig, episode_rewards, run_episode, terminal_reward
from adaptnav.policy import Adam, Batch, PolicyParams, PPOConfig, compute_gae, save_checkpoint, update_policy
from adaptnav.scenario import PRESETS, generate_scenario
from adaptnav.scheduler import get_platform


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 200_000
    presets: tuple = PRESETS
    platforms: tuple = ("pi4b", "orangepi5")
    worlds_per_preset: int = 4
    seed: int = 0
    checkpoint_every: int = 10  # policy updates between checkpoints
    reward_scale: float = 0.1
    ppo: PPOConfig = field(default_factory=PPOConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)


class RolloutRecorder:
    """Collects (obs, action, log-prob, value, reward) per decision of sampled episodes."""

    def __init__(self, config: LoopConfig, path_prev: float):
        self.weights = config.rewards
        self.path_prev = path_prev
        self.obs, self.actions, self.logp, self.values, self.rewards, self.dones = [], [], [], [], [], []
        self.episode_return = 0.0
        self._start = 0

    def record(self, x, action, logp, value, raw, ctx):
        r = episode_rewards(ctx, raw, self.weights)
        self.obs.append(x)
        self.actions.append(action)
        self.logp.append(logp)
        self.values.append(value)
        self.rewards.append(r)
        self.dones.append(False)

    def finish(self, ep, metrics):
        if len(self.rewards) == self._start:
            return
        self.rewards[-1] += terminal_reward(ep, metrics, self.path_prev, self.weights)
        self.dones[-1] = True
        self.episode_return = float(sum(self.rewards[self._start :]))
        self._start = len(self.rewards)

    def __len__(self):
        return len(self.rewards)


def train(cfg: TrainConfig = TrainConfig(), out_dir=None, params: PolicyParams | None = None, log=None):
    """Train a policy; returns (params, learning curve rows).

    Each row is (update, env_steps, episode, preset, return). With
    ``out_dir`` a checkpoint is written every ``checkpoint_every`` updates,
    plus ``policy.json`` and ``learning_curve.csv`` at the end. Raises
    FloatingPointError on a non-finite loss.
    """
    rng = np.random.default_rng(cfg.seed)
    params = params or PolicyParams.init(rng, grids=cfg.loop.grids)
    opt = Adam(params, lr=cfg.ppo.lr)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    worlds = {}
    path_prev = {}
    curve = []
    steps = 0
    episode = 0
    update = 0
    while steps < cfg.total_steps:
        buf = RolloutRecorder(cfg.loop, 0.0)
        while len(buf) < cfg.ppo.batch_steps and steps + len(buf) < cfg.total_steps:
            preset = cfg.presets[int(rng.integers(len(cfg.presets)))]
            wseed = int(rng.integers(cfg.worlds_per_preset))
            platform = get_platform(cfg.platforms[int(rng.integers(len(cfg.platforms)))])
            key = (preset, wseed)
            if key not in worlds:
                worlds[key] = generate_scenario(preset, seed=wseed)
            world = worlds[key]
            buf.path_prev = path_prev.get(key, math.dist(world.start, world.goal))
            before = len(buf)
            m = run_episode(world, platform, "adaptive-rl", cfg.loop, int(rng.integers(2**31)), params, recorder=buf)
            if len(buf) > before:
                episode += 1
                curve.append((update, steps + len(buf), episode, preset, buf.episode_return))
                if log:
                    log(f"episode {episode} {preset} {platform.name} {m.outcome} return {buf.episode_return:.2f}")
            if m.success:
                path_prev[key] = m.path_length
        if len(buf) == 0:
            break
        steps += len(buf)
        rewards = np.asarray(buf.rewards) * cfg.reward_scale
        adv, ret = compute_gae(rewards, np.asarray(buf.values), np.asarray(buf.dones), 0.0,
                               cfg.ppo.gamma, cfg.ppo.gae_lambda)
        batch = Batch(np.asarray(buf.obs), np.asarray(buf.actions, dtype=int), np.asarray(buf.logp), adv, ret)
        info = update_policy(batch, params, opt, cfg.ppo, rng)
        update += 1
        if log:
            log(f"update {update} steps {steps} loss {info['loss']:.4f}")
        if out is not None and update % cfg.checkpoint_every == 0:
            save_checkpoint(params, out / f"checkpoint_{update:04d}.json", {"update": update, "steps": steps})
    if out is not None:
        save_checkpoint(params, out / "policy.json", {"update": update, "steps": steps})
        write_learning_curve(out / "learning_curve.csv", curve)
    return params, curve


def write_learning_curve(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write("# schema=1\n")
        w = csv.writer(fh)
        w.writerow(["update", "env_steps", "episode", "preset", "return"])
        for r in rows:
            w.writerow([r[0], r[1], r[2], r[3], repr(float(r[4]))])


def quartile_means(returns):
    """Mean episode return of the first and last quarter of training."""
    r = np.asarray(returns, dtype=float)
    if len(r) < 4:
        raise ValueError("need at least four episodes")
    q = len(r) // 4
    return float(r[:q].mean()), float(r[-q:].mean())
