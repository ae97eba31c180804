"""Command-line entry point: generate, run, train, compare."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from adaptnav.config import ConfigError, RunConfig, dumps_config, load_config, parse_seeds
from adaptnav.loop import TRACE_FIELDS, CheckpointMissing, EpisodeMetrics, run_episode
from adaptnav.policy import PolicyParams, load_checkpoint, save_checkpoint
from adaptnav.scenario import ScenarioError, generate_scenario, load_world, save_world
from adaptnav.scheduler import get_platform
from adaptnav.training import train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_CHECKPOINT = 4
EXIT_NONFINITE = 5
EXIT_MISMATCH = 6

SCHEMA_LINE = "# schema=1"


class KeyMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# worlds


def world_path(root, preset, seed) -> Path:
    return Path(root) / "worlds" / f"{preset}_s{seed}.world"


def cmd_generate(cfg: RunConfig) -> list[Path]:
    paths = []
    for preset in cfg.presets:
        for seed in cfg.seeds:
            world = generate_scenario(preset, cfg.density, seed)
            path = world_path(cfg.output_dir, preset, seed)
            path.parent.mkdir(parents=True, exist_ok=True)
            save_world(world, path)
            paths.append(path)
    return paths


def _world(cfg: RunConfig, preset, seed, world_dir=None):
    if world_dir is not None:
        path = Path(world_dir) / f"{preset}_s{seed}.world"
        if path.exists():
            return load_world(path)
    return generate_scenario(preset, cfg.density, seed)


# ---------------------------------------------------------------------------
# run


def _episode_job(args):
    cfg, preset, platform, strategy, seed, world_dir = args
    policy = load_checkpoint(cfg.checkpoint, cfg.loop_config().grids) if strategy == "adaptive-rl" else None
    world = _world(cfg, preset, seed, world_dir)
    return run_episode(world, get_platform(platform), strategy, cfg.loop_config(), seed, policy, trace=cfg.trace)


def run_suite(cfg: RunConfig, world_dir=None) -> list[EpisodeMetrics]:
    """All (preset, platform, strategy, seed) episodes, sorted by that key."""
    if "adaptive-rl" in cfg.strategies and (not cfg.checkpoint or not Path(cfg.checkpoint).exists()):
        raise CheckpointMissing(f"adaptive-rl needs a checkpoint; got {cfg.checkpoint!r}")
    jobs = [(cfg, p, pl, st, s, world_dir) for p in cfg.presets for pl in cfg.platforms
            for st in cfg.strategies for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_episode_job, jobs))
    else:
        results = [_episode_job(j) for j in jobs]
    return sorted(results, key=lambda m: (m.world, m.platform, m.strategy, m.seed))


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EpisodeMetrics.CSV_FIELDS)
    for m in rows:
        w.writerow(m.row())
    return buf.getvalue()


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != SCHEMA_LINE:
            raise ConfigError(f"{path}: expected '{SCHEMA_LINE}' header, got {first!r}")
        return list(csv.DictReader(fh))


def summarize(rows) -> dict:
    out = {}
    groups = {}
    for m in rows:
        groups.setdefault(m.strategy, []).append(m)
        groups.setdefault(f"{m.strategy}/{m.platform}", []).append(m)
    for key, ms in sorted(groups.items()):
        jobs = sum(m.jobs for m in ms)
        out[key] = {
            "episodes": len(ms),
            "success_rate": sum(m.success for m in ms) / len(ms),
            "mean_util": float(np.mean([m.mean_util for m in ms])),
            "mean_flight_time": float(np.mean([m.flight_time for m in ms])),
            "mean_path_length": float(np.mean([m.path_length for m in ms])),
            "mean_velocity_std": float(np.mean([m.velocity_std for m in ms])),
            "miss_ratio": (sum(m.misses for m in ms) / jobs) if jobs else 0.0,
            "collisions": int(sum(m.collision_count for m in ms)),
        }
    return out


def cmd_run(cfg: RunConfig, world_dir=None) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if world_dir is None and (out / "worlds").is_dir():
        world_dir = out / "worlds"
    rows = run_suite(cfg, world_dir)
    (out / "config.ini").write_text(dumps_config(cfg))
    path = out / "metrics.csv"
    path.write_text(metrics_csv(rows))
    (out / "summary.json").write_text(json.dumps(summarize(rows), indent=2, sort_keys=True) + "\n")
    if cfg.trace:
        tdir = out / "traces"
        tdir.mkdir(exist_ok=True)
        for m in rows:
            with open(tdir / f"{m.world}_{m.platform}_{m.strategy}_s{m.seed}.csv", "w", newline="") as fh:
                fh.write(SCHEMA_LINE + "\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TRACE_FIELDS)
                for r in m.trace:
                    w.writerow([repr(float(v)) for v in r])
    return path


# ---------------------------------------------------------------------------
# train


def cmd_train(cfg: RunConfig, log=None) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dumps_config(cfg))
    tcfg = cfg.train_config()
    if tcfg.total_steps <= 0:
        params = PolicyParams.init(np.random.default_rng(tcfg.seed), grids=tcfg.loop.grids)
        save_checkpoint(params, out / "checkpoint_0000.json", {"update": 0, "steps": 0})
        save_checkpoint(params, out / "policy.json", {"update": 0, "steps": 0})
        return out / "policy.json"
    try:
        train(tcfg, out, log=log)
    except FloatingPointError as exc:
        (out / "diagnostic.txt").write_text(f"training aborted: {exc}\n")
        raise
    return out / "policy.json"


# ---------------------------------------------------------------------------
# compare

_COMPARE_FIELDS = {
    "mean_util": "utilization",
    "flight_time": "flight_time",
    "path_length": "path_length",
    "velocity_std": "velocity_std",
    "miss_ratio": "miss_ratio",
}


def _pick(rows, strategy, default):
    present = sorted({r["strategy"] for r in rows})
    want = strategy or (default if default in present else None)
    if want is None:
        if len(present) != 1:
            raise KeyMismatch(f"several strategies in one file ({', '.join(present)}); name one")
        want = present[0]
    picked = [r for r in rows if r["strategy"] == want]
    if not picked:
        raise KeyMismatch(f"no rows for strategy {want!r}")
    return picked


def compare_rows(base_rows, adapt_rows) -> dict:
    """Per-scenario mean deltas (adaptive minus baseline) over matched keys.

    Raises KeyMismatch unless both sides hold the same (world, platform, seed) keys.
    """
    def index(rows):
        d = {}
        for r in rows:
            k = (r["world"], r["platform"], int(r["seed"]))
            if k in d:
                raise KeyMismatch(f"duplicate key {k}")
            d[k] = r
        return d

    b, a = index(base_rows), index(adapt_rows)
    if set(b) != set(a):
        missing = sorted(set(b) ^ set(a))
        raise KeyMismatch(f"unmatched keys, e.g. {missing[:3]}")
    per_world = {}
    for k in sorted(b):
        per_world.setdefault(k[0], []).append(k)
    result = {"scenarios": {}, "overall": {}}

    def block(keys):
        d = {"pairs": len(keys)}
        for col, name in _COMPARE_FIELDS.items():
            bv = np.array([float(b[k][col]) for k in keys])
            av = np.array([float(a[k][col]) for k in keys])
            d[f"baseline_{name}"] = float(bv.mean())
            d[f"adaptive_{name}"] = float(av.mean())
            d[f"delta_{name}"] = float((av - bv).mean())
            base = float(bv.mean())
            d[f"relative_{name}"] = float((av.mean() - base) / base) if base != 0 else 0.0
        d["util_lower_pairs"] = int(sum(float(a[k]["mean_util"]) < float(b[k]["mean_util"]) for k in keys))
        return d

    for world, keys in per_world.items():
        result["scenarios"][world] = block(keys)
    result["overall"] = block(sorted(b))
    return result


def format_comparison(result) -> str:
    lines = [f"{'scenario':16s} {'pairs':>5s} {'util base':>10s} {'util adapt':>10s} {'util %':>8s} "
             f"{'time %':>8s} {'path %':>8s} {'vstd d':>8s} {'miss d':>8s}"]
    items = list(result["scenarios"].items()) + [("ALL", result["overall"])]
    for name, d in items:
        lines.append(
            f"{name:16s} {d['pairs']:5d} {d['baseline_utilization']:10.3f} {d['adaptive_utilization']:10.3f} "
            f"{100 * d['relative_utilization']:8.1f} {100 * d['relative_flight_time']:8.1f} "
            f"{100 * d['relative_path_length']:8.1f} {d['delta_velocity_std']:8.3f} {d['delta_miss_ratio']:8.4f}"
        )
    return "\n".join(lines)


def cmd_compare(base_csv, adapt_csv, out_dir=None, base_strategy=None, adapt_strategy=None) -> dict:
    base = _pick(read_metrics_csv(base_csv), base_strategy, "fixed-baseline")
    adapt_all = read_metrics_csv(adapt_csv)
    default = next((s for s in ("adaptive-rl", "adaptive-heuristic") if any(r["strategy"] == s for r in adapt_all)),
                   None)
    adapt = _pick(adapt_all, adapt_strategy, default)
    result = compare_rows(base, adapt)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
        (out / "comparison.txt").write_text(format_comparison(result) + "\n")
    return result


# ---------------------------------------------------------------------------
# argument handling


def _add_common(p):
    p.add_argument("--config", help="INI file with [scenario] [run] [eci] [adapter] [wcet] [train] sections")
    p.add_argument("--output-dir", help="output directory (env ADAPTNAV_OUTPUT_DIR also works)")


def _add_scenario(p):
    p.add_argument("--presets", nargs="+", metavar="PRESET")
    p.add_argument("--seeds", help="e.g. 0-9 or 1,4,7")
    p.add_argument("--density", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adaptnav", description="Adaptive UAV navigation simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write scenario world files")
    _add_common(g)
    _add_scenario(g)

    r = sub.add_parser("run", help="fly episodes and write metrics")
    _add_common(r)
    _add_scenario(r)
    r.add_argument("--platforms", nargs="+")
    r.add_argument("--strategies", nargs="+")
    r.add_argument("--checkpoint")
    r.add_argument("--workers", type=int)
    r.add_argument("--trace", action="store_true", default=None)
    r.add_argument("--worlds", help="directory of world files (default: <output>/worlds when present)")

    t = sub.add_parser("train", help="train the frequency policy with PPO")
    _add_common(t)
    t.add_argument("--presets", nargs="+", metavar="PRESET")
    t.add_argument("--steps", type=int, dest="total_steps")
    t.add_argument("--seed", type=int, dest="train_seed")
    t.add_argument("--checkpoint-every", type=int)
    t.add_argument("--quiet", action="store_true")

    c = sub.add_parser("compare", help="A/B table from two metrics CSVs")
    c.add_argument("baseline_csv")
    c.add_argument("adaptive_csv")
    c.add_argument("--output-dir")
    c.add_argument("--baseline-strategy")
    c.add_argument("--adaptive-strategy")
    return ap


def _apply_flags(cfg: RunConfig, ns) -> RunConfig:
    upd = {}
    simple = ("density", "checkpoint", "workers", "trace", "total_steps", "train_seed", "checkpoint_every")
    for name in simple:
        v = getattr(ns, name, None)
        if v is not None:
            upd[name] = v
    for name in ("presets", "platforms", "strategies"):
        v = getattr(ns, name, None)
        if v:
            upd[name] = tuple(v)
    if getattr(ns, "seeds", None):
        upd["seeds"] = parse_seeds(ns.seeds)
    if getattr(ns, "output_dir", None):
        upd["output_dir"] = ns.output_dir
    return replace(cfg, **upd).validate()


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    err = sys.stderr
    try:
        if ns.command == "compare":
            result = cmd_compare(ns.baseline_csv, ns.adaptive_csv, ns.output_dir, ns.baseline_strategy,
                                 ns.adaptive_strategy)
            print(format_comparison(result))
            return EXIT_OK
        cfg = _apply_flags(load_config(ns.config), ns)
        if ns.command == "generate":
            paths = cmd_generate(cfg)
            print(f"wrote {len(paths)} world files under {Path(cfg.output_dir) / 'worlds'}")
        elif ns.command == "run":
            path = cmd_run(cfg, ns.worlds)
            print(f"wrote {path}")
        elif ns.command == "train":
            log = None if ns.quiet else (lambda msg: print(msg, flush=True))
            path = cmd_train(cfg, log)
            print(f"wrote {path}")
        return EXIT_OK
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, KeyMismatch):
            print(f"error: key mismatch: {exc}", file=err)
            return EXIT_MISMATCH
        if isinstance(exc, ScenarioError):
            print(f"error: infeasible: {exc}", file=err)
            return EXIT_INFEASIBLE
        print(f"error: config: {exc}", file=err)
        return EXIT_CONFIG
    except CheckpointMissing as exc:
        print(f"error: checkpoint missing: {exc}", file=err)
        return EXIT_CHECKPOINT
    except FloatingPointError as exc:
        print(f"error: non-finite loss: {exc}", file=err)
        return EXIT_NONFINITE
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
