"""Run configuration: an INI file of ``key = value`` sections with defaults
for every field. Unknown sections or keys are rejected."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace
from pathlib import Path

from adaptnav.loop import STRATEGIES, LoopConfig
from adaptnav.policy import DEFAULT_GRIDS, PPOConfig, RewardWeights
from adaptnav.scenario import PRESETS
from adaptnav.scheduler import PLATFORMS
from adaptnav.strategy import DEFAULT_LADDER, Wcet
from adaptnav.training import TrainConfig

OUTPUT_ENV = "ADAPTNAV_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _words(text):
    return tuple(x for x in text.replace(",", " ").split())


def parse_seeds(text):
    """``0-9``, ``1,4,7`` or a mix of both."""
    out = []
    for part in _words(text):
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none", "default") else float(text)


@dataclass(frozen=True)
class RunConfig:
    # [scenario]
    presets: tuple = PRESETS
    density: float | None = None
    seeds: tuple = (0,)
    # [run]
    platforms: tuple = ("pi4b",)
    strategies: tuple = ("adaptive-heuristic", "fixed-baseline")
    output_dir: str = "out"
    checkpoint: str = ""
    workers: int = 1
    trace: bool = False
    # [eci]
    M: int = 3
    sigma: float = 1.0
    K: int = 5
    rho_occ: float = 0.02
    lay_max: int = 8
    # [adapter]
    ladder: tuple = DEFAULT_LADDER
    gamma: float = 1.0
    s_min: float = 0.6
    f_per_grid: tuple = DEFAULT_GRIDS[0]
    f_col_grid: tuple = DEFAULT_GRIDS[1]
    f_dif_grid: tuple = DEFAULT_GRIDS[2]
    w_a: float = -0.1
    w_s: float = 1.0
    w_col: float = -100.0
    lam: float = 1.0
    w_util: float = 1.0
    # [wcet] reference seconds on the speed-1.0 platform
    c_per: float = 0.020
    c_plan: float = 0.120
    c_col: float = 0.005
    c_dif: float = 0.003
    per_scale_max: float = 4.0
    per_scale_min: float = 0.25
    # [train]
    total_steps: int = 200_000
    train_seed: int = 0
    checkpoint_every: int = 10
    worlds_per_preset: int = 4
    reward_scale: float = 0.1
    lr: float = 3e-4
    batch_steps: int = 2048
    epochs: int = 10
    minibatch: int = 256
    train_platforms: tuple = ("pi4b", "orangepi5")

    def validate(self):
        for p in self.presets:
            if p not in PRESETS:
                raise ConfigError(f"unknown preset {p!r}")
        for p in self.platforms + self.train_platforms:
            if p not in PLATFORMS:
                raise ConfigError(f"unknown platform {p!r}")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}")
        if not self.seeds:
            raise ConfigError("no seeds")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if list(self.ladder) != sorted(self.ladder, reverse=True) or not self.ladder:
            raise ConfigError("ladder must be non-empty and sorted coarse to fine")
        if self.density is not None and self.density <= 0:
            raise ConfigError("density must be positive")
        return self

    def loop_config(self) -> LoopConfig:
        return LoopConfig(
            wcet=Wcet(self.c_per, self.c_plan, self.c_col, self.c_dif),
            per_scale_max=self.per_scale_max,
            per_scale_min=self.per_scale_min,
            ladder=tuple(self.ladder),
            gamma=self.gamma,
            s_min=self.s_min,
            eci_M=self.M,
            eci_sigma=self.sigma,
            eci_K=self.K,
            rho_occ=self.rho_occ,
            lay_max=self.lay_max,
            grids=(tuple(self.f_per_grid), tuple(self.f_col_grid), tuple(self.f_dif_grid)),
            rewards=RewardWeights(self.w_a, self.w_s, self.w_col, self.lam, self.w_util),
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            total_steps=self.total_steps,
            presets=tuple(self.presets),
            platforms=tuple(self.train_platforms),
            worlds_per_preset=self.worlds_per_preset,
            seed=self.train_seed,
            checkpoint_every=self.checkpoint_every,
            reward_scale=self.reward_scale,
            ppo=PPOConfig(lr=self.lr, batch_steps=self.batch_steps, epochs=self.epochs, minibatch=self.minibatch),
            loop=self.loop_config(),
        )


# section -> {key: (field name, parser)}
_SCHEMA = {
    "scenario": {"presets": ("presets", _words), "density": ("density", _opt_float), "seeds": ("seeds", parse_seeds)},
    "run": {
        "platforms": ("platforms", _words),
        "strategies": ("strategies", _words),
        "output_dir": ("output_dir", str),
        "checkpoint": ("checkpoint", str),
        "workers": ("workers", int),
        "trace": ("trace", _bool),
    },
    "eci": {"M": ("M", int), "sigma": ("sigma", float), "K": ("K", int), "rho_occ": ("rho_occ", float),
            "lay_max": ("lay_max", int)},
    "adapter": {
        "ladder": ("ladder", _floats),
        "gamma": ("gamma", float),
        "s_min": ("s_min", float),
        "f_per_grid": ("f_per_grid", _floats),
        "f_col_grid": ("f_col_grid", _floats),
        "f_dif_grid": ("f_dif_grid", _floats),
        "w_a": ("w_a", float),
        "w_s": ("w_s", float),
        "w_col": ("w_col", float),
        "lambda": ("lam", float),
        "w_util": ("w_util", float),
    },
    "wcet": {"per": ("c_per", float), "plan": ("c_plan", float), "col": ("c_col", float), "dif": ("c_dif", float),
             "per_scale_max": ("per_scale_max", float), "per_scale_min": ("per_scale_min", float)},
    "train": {
        "total_steps": ("total_steps", int),
        "seed": ("train_seed", int),
        "checkpoint_every": ("checkpoint_every", int),
        "worlds_per_preset": ("worlds_per_preset", int),
        "reward_scale": ("reward_scale", float),
        "lr": ("lr", float),
        "batch_steps": ("batch_steps", int),
        "epochs": ("epochs", int),
        "minibatch": ("minibatch", int),
        "platforms": ("train_platforms", _words),
    },
}


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    updates = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            name, conv = _SCHEMA[section][key]
            try:
                updates[name] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return replace(base or RunConfig(), **updates).validate()


def load_config(path=None, env=None) -> RunConfig:
    """Defaults, then the file (if any), then the output-directory env override."""
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = parse_config(text, cfg)
    env = os.environ if env is None else env
    if env.get(OUTPUT_ENV):
        cfg = replace(cfg, output_dir=env[OUTPUT_ENV])
    return cfg


def dumps_config(cfg: RunConfig) -> str:
    """Render every field; parse_config(dumps_config(c)) == c."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (name, _) in keys.items():
            lines.append(f"{key} = {_format(getattr(cfg, name))}")
        lines.append("")
    return "\n".join(lines)

