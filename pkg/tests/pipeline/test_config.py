import argparse

import pytest

import tacslam.config
from tacslam.pipeline import ConfigError, PipelineConfig, RunParams, dump_yaml, from_dict, load_config, set_key
from tacslam.pipeline.cli import SEED_KEYS, config_from_args
from tacslam.surface import SensorSpec


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.run.mode == "offline" and cfg.graph.solver == "lm"
    assert cfg.tracking.profile == "reconstruction"
    assert cfg.thresholds.ccs_min == pytest.approx(0.7)
    assert cfg.object == {"kind": "bumpy-sphere"}
    spec = SensorSpec(width=64, height=48, pitch=0.1)
    assert cfg.with_sensor(spec).sensor == spec and cfg.sensor != spec


def test_run_params_validation():
    with pytest.raises(ValueError):
        RunParams(mode="batch")
    with pytest.raises(ValueError):
        RunParams(queue_size=0)
    with pytest.raises(ValueError):
        RunParams(loop_delay=-1.0)


def test_layering_store_yaml_overrides(tmp_path):
    tacslam.config.set_info("tracking.k_pixels", "1000")
    tacslam.config.set_info("loop.ratio", "0.6")
    tacslam.config.set_info("api_key", "not-a-pipeline-key")
    assert load_config().tracking.k_pixels == 1000

    path = tmp_path / "cfg.yaml"
    path.write_text("tracking:\n  k_pixels: 2000\nrun:\n  mode: online\n")
    cfg = load_config(path)
    assert cfg.tracking.k_pixels == 2000 and cfg.loop.ratio == pytest.approx(0.6)
    assert cfg.run.mode == "online"

    cfg = load_config(path, {"tracking.k_pixels": 2500, "run.mode": None})
    assert cfg.tracking.k_pixels == 2500 and cfg.run.mode == "online"
    assert load_config(path, use_store=False).loop.ratio == PipelineConfig().loop.ratio


def test_unknown_keys_and_bad_values():
    with pytest.raises(ConfigError) as e:
        from_dict({"tracking": {"k_pixel": 10}})
    assert e.value.key == "tracking.k_pixel"
    with pytest.raises(ConfigError):
        from_dict({"tracker": {}})
    with pytest.raises(ConfigError):
        from_dict({"run": {"mode": "batch"}})
    with pytest.raises(ConfigError):
        from_dict({"run": 3})
    with pytest.raises(ConfigError):
        set_key(PipelineConfig(), "seed", 3)


def test_unknown_profile_is_rejected():
    with pytest.raises(ConfigError):
        load_config(overrides={"tracking.profile": "fast"}, use_store=False)


def test_yaml_types_are_coerced():
    cfg = from_dict({"calibration": {"hidden": [8, 8]}, "graph": {"lambda_init": 1}})
    assert cfg.calibration.hidden == (8, 8)
    assert isinstance(cfg.graph.lambda_init, float)


def test_object_spec_merges_or_replaces():
    cfg = from_dict({"object": {"radius": 6.0}})
    assert cfg.object == {"kind": "bumpy-sphere", "radius": 6.0}
    cfg = from_dict({"object": {"kind": "sphere", "radius": 5.0}})
    assert cfg.object == {"kind": "sphere", "radius": 5.0}
    with pytest.raises(ConfigError):
        from_dict({"object": "sphere"})


def test_dump_yaml_reloads_to_the_same_config(tmp_path):
    cfg = set_key(from_dict({"object": {"kind": "sphere", "radius": 5.0}}), "loop.ratio", 0.65)
    dump_yaml(cfg, tmp_path / "effective.yaml")
    assert load_config(tmp_path / "effective.yaml", use_store=False) == cfg


def test_unreadable_yaml(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("tracking: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_flags_beat_set_and_seed_reaches_every_stage():
    args = argparse.Namespace(config=None, seed=7, set=[("graph.solver", "gnc"), ("run.mode", "offline")],
                              mode="online", solver=None, profile="tracking", loop_delay=0.5,
                              no_loops=True, no_remesh=False, no_realtime=True)
    cfg = config_from_args(args)
    assert cfg.run.mode == "online" and cfg.graph.solver == "gnc"
    assert cfg.tracking.profile == "tracking" and cfg.run.loop_delay == 0.5
    assert not cfg.run.loops and not cfg.run.realtime and cfg.run.remesh
    for key in SEED_KEYS:
        section, name = key.split(".")
        assert getattr(getattr(cfg, section), name) == 7
