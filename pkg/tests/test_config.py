from dataclasses import fields, replace

import pytest

from adaptnav.config import ConfigError, RunConfig, dumps_config, load_config, parse_config


def test_every_field_has_a_default():
    cfg = RunConfig()
    for f in fields(RunConfig):
        assert getattr(cfg, f.name) is not None or f.name == "density"


@pytest.mark.parametrize("cfg", [
    RunConfig(),
    replace(RunConfig(), presets=("corridor",), density=3.5, seeds=(1, 4, 7), strategies=("fixed-baseline",),
            sigma=0.75, ladder=(0.5, 0.2), w_a=-0.25, c_plan=0.2, trace=True, train_platforms=("tx2",)),
])
def test_round_trip(cfg):
    assert parse_config(dumps_config(cfg)) == cfg


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ConfigError, match="sigmma"):
        parse_config("[eci]\nsigmma = 2\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[nav]\nx = 1\n")


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        parse_config("[run]\nplatforms = pi5\n")
    with pytest.raises(ConfigError):
        parse_config("[adapter]\nladder = 0.1, 0.5\n")
    with pytest.raises(ConfigError):
        parse_config("[eci]\nM = three\n")


def test_seed_ranges_and_env_override(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[scenario]\nseeds = 0-2, 7\n[run]\noutput_dir = here\n")
    cfg = load_config(path, env={})
    assert cfg.seeds == (0, 1, 2, 7) and cfg.output_dir == "here"
    assert load_config(path, env={"ADAPTNAV_OUTPUT_DIR": "/elsewhere"}).output_dir == "/elsewhere"


def test_loop_config_carries_overrides():
    cfg = parse_config("[eci]\nK = 7\n[wcet]\nplan = 0.3\n[adapter]\ns_min = 0.5\n")
    loop = cfg.loop_config()
    assert (loop.eci_K, loop.wcet.plan, loop.s_min) == (7, 0.3, 0.5)
