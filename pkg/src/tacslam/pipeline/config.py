'''
Module: config.py
Description: Pipeline configuration; one section per module, layered from defaults, user store, YAML and CLI

Usage:
[Errors]
- ConfigError: unknown key or out-of-range value

[Sections]
- RunParams: mode, seeds, queue sizes, output toggles
- PipelineConfig: every module's parameters + object spec

[Loading]
- from_dict(): nested mapping -> PipelineConfig (unknown keys rejected)
- to_dict() / dump_yaml(): PipelineConfig -> nested mapping / YAML text
- load_config(): defaults < user store < --config YAML < CLI overrides
- set_key(): apply one dotted override ("tracking.k_pixels", 3000)
'''
# Import packages
from __future__ import annotations
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

from .. import config as user_store
from ..errors import TacSlamError
from ..graph import GraphParams
from ..loop import LoopParams
from ..recon import FusionParams, RemeshParams
from ..sim.calibration import TrainParams
from ..sim.render import RenderParams
from ..sim.trajectory import TrajectoryParams
from ..surface import SensorSpec, SurfaceParams
from ..tracking import TrackingParams
from ..tracking.tracker import PROFILES

log = logging.getLogger(__name__)

MODES = ("offline", "online")


class ConfigError(TacSlamError):
    """Raised for unknown configuration keys or values a section rejects."""


@dataclass(frozen=True)
class RunParams:
    mode: str = "offline"
    seed: int = 0
    loops: bool = True
    queue_size: int = 16
    loop_delay: float = 0.0         # s, artificial loop-stage latency (online experiments)
    realtime: bool = True           # online mode admits frames at the sequence frame rate
    snapshot_every: int = 10        # keyframes between online fusion snapshots
    remesh: bool = True
    chamfer_samples: int = 100_000
    ncd_contacts: int = 100
    workers: int = 1
    photometric: bool = False       # simulate: store RGB frames instead of normals

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.queue_size < 1 or self.snapshot_every < 1 or self.workers < 1:
            raise ValueError("queue_size, snapshot_every and workers must be >= 1")
        if self.loop_delay < 0:
            raise ValueError("loop_delay must be non-negative")


def _default_object() -> dict[str, Any]:
    return {"kind": "bumpy-sphere"}


@dataclass(frozen=True)
class PipelineConfig:
    sensor: SensorSpec = field(default_factory=SensorSpec)
    surface: SurfaceParams = field(default_factory=SurfaceParams)
    render: RenderParams = field(default_factory=RenderParams)
    calibration: TrainParams = field(default_factory=TrainParams)
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    tracking: TrackingParams = field(default_factory=TrackingParams)
    loop: LoopParams = field(default_factory=LoopParams)
    graph: GraphParams = field(default_factory=GraphParams)
    fusion: FusionParams = field(default_factory=FusionParams)
    remesh: RemeshParams = field(default_factory=RemeshParams)
    run: RunParams = field(default_factory=RunParams)
    object: dict = field(default_factory=_default_object)

    @property
    def thresholds(self):
        return self.tracking.thresholds

    def with_sensor(self, spec: SensorSpec) -> "PipelineConfig":
        return dataclasses.replace(self, sensor=spec)


SECTIONS = tuple(f.name for f in dataclasses.fields(PipelineConfig) if f.name != "object")


# ---------- Conversion ----------

def _as_tuple(value: Any) -> Any:
    return tuple(_as_tuple(v) for v in value) if isinstance(value, (list, tuple)) else value


def _coerce(default: Any, value: Any) -> Any:
    """YAML lists -> (nested) tuples where the default is a tuple; ints -> floats where the default is a float."""
    if isinstance(default, tuple) and isinstance(value, (list, tuple)):
        return _as_tuple(value)
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def _update_section(section: Any, values: Mapping[str, Any], name: str) -> Any:
    known = {f.name: f for f in dataclasses.fields(section)}
    kwargs = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key {name}.{key}", key=f"{name}.{key}", value=value)
        kwargs[key] = _coerce(getattr(section, key), value)
    try:
        return dataclasses.replace(section, **kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value in section {name}: {e}", key=name, value=dict(values)) from e


def merge(cfg: PipelineConfig, data: Optional[Mapping[str, Any]]) -> PipelineConfig:
    '''
    merge(): overlay a nested mapping {section: {key: value}} onto cfg

    Parameters:
    cfg (PipelineConfig): base configuration
    data (mapping): nested overrides; an 'object' mapping with a kind replaces the object spec
    '''
    if not data:
        return cfg
    if not isinstance(data, Mapping):
        raise ConfigError("configuration root must be a mapping", key="", value=data)
    updates = {}
    for name, values in data.items():
        if name == "object":
            if not isinstance(values, Mapping):
                raise ConfigError("object spec must be a mapping", key="object", value=values)
            # a new kind replaces the spec; parameters alone update the current one
            updates["object"] = dict(values) if "kind" in values else {**cfg.object, **values}
        elif name in SECTIONS:
            if not isinstance(values, Mapping):
                raise ConfigError(f"section {name} must be a mapping", key=name, value=values)
            updates[name] = _update_section(getattr(cfg, name), values, name)
        else:
            raise ConfigError(f"unknown configuration section {name!r}", key=name, value=values)
    return dataclasses.replace(cfg, **updates)


def from_dict(data: Optional[Mapping[str, Any]]) -> PipelineConfig:
    return merge(PipelineConfig(), data)


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def to_dict(cfg: PipelineConfig) -> dict[str, Any]:
    out = {name: {k: _plain(v) for k, v in dataclasses.asdict(getattr(cfg, name)).items()} for name in SECTIONS}
    out["object"] = _plain(dict(cfg.object))
    return out


def dump_yaml(cfg: PipelineConfig, path: Optional[Union[str, Path]] = None) -> str:
    text = yaml.safe_dump(to_dict(cfg), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text


def read_yaml(path: Union[str, Path]) -> dict[str, Any]:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read configuration {path}: {e}", key=str(path), value=None) from e
    return data or {}


# ---------- Dotted keys ----------

def dotted_to_nested(flat: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    """{'tracking.k_pixels': 3000} -> {'tracking': {'k_pixels': 3000}}; keys without a dot are skipped."""
    nested: dict[str, dict[str, Any]] = {}
    for key, value in flat.items():
        if "." not in key:
            continue
        section, name = key.split(".", 1)
        nested.setdefault(section, {})[name] = value
    return nested


def set_key(cfg: PipelineConfig, key: str, value: Any) -> PipelineConfig:
    if "." not in key:
        raise ConfigError(f"configuration keys look like section.key, got {key!r}", key=key, value=value)
    return merge(cfg, dotted_to_nested({key: value}))


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None,
                use_store: bool = True) -> PipelineConfig:
    '''
    load_config(): defaults < user store (~/.config/tacslam/.config.json) < YAML file < CLI overrides

    Parameters:
    path (str | Path, optional): YAML configuration file (Default: None)
    overrides (mapping, optional): dotted keys from CLI flags; None values are ignored (Default: None)
    use_store (bool, optional): apply dotted keys from the user store (Default: True)

    Dependencies: pyyaml, tacslam.config
    '''
    cfg = PipelineConfig()
    if use_store:
        store = {k: v for k, v in user_store.load_config().items() if "." in k and k.split(".", 1)[0] in SECTIONS + ("object",)}
        if store:
            log.debug("user store overrides: %s", sorted(store))
            cfg = merge(cfg, dotted_to_nested(store))
    if path is not None:
        cfg = merge(cfg, read_yaml(path))
    if overrides:
        cfg = merge(cfg, dotted_to_nested({k: v for k, v in overrides.items() if v is not None}))
    if cfg.tracking.profile not in PROFILES:
        raise ConfigError(f"unknown threshold profile {cfg.tracking.profile!r}", key="tracking.profile",
                          value=cfg.tracking.profile)
    return cfg
