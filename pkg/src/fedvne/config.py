"""Experiment configuration: flat key=value files plus CLI overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

POLICIES = ("hfl", "noderank", "random")


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    # physical network
    num_domains: int = 4
    nodes_per_domain: int = 25
    num_links: int = 600
    cpu_min: float = 50.0
    cpu_max: float = 100.0
    bw_min: float = 50.0
    bw_max: float = 100.0
    inter_link_ratio: float = 0.1
    # request stream
    vnr_count: int = 2000
    train_count: int = 1000
    test_count: int = 1000
    vn_nodes_min: int = 2
    vn_nodes_max: int = 10
    vnode_cpu_min: float = 1.0
    vnode_cpu_max: float = 50.0
    vlink_bw_min: float = 1.0
    vlink_bw_max: float = 50.0
    vlink_prob: float = 0.5
    arrival_rate: float = 0.05
    mean_lifetime: float = 1000.0
    # training
    learning_rate: float = 2.0
    batch_size: int = 50
    epochs: int = 30
    reject_reward: float = 0.0
    # evaluation / run
    metrics_interval: float = 100.0
    seed: int = 42
    policy: str = "hfl"

    def validate(self) -> None:
        positive = (
            "num_domains",
            "nodes_per_domain",
            "num_links",
            "vn_nodes_min",
            "batch_size",
            "epochs",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        for name in ("vnr_count", "train_count", "test_count", "reject_reward"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must not be negative")
        ranges = (
            ("cpu_min", "cpu_max"),
            ("bw_min", "bw_max"),
            ("vn_nodes_min", "vn_nodes_max"),
            ("vnode_cpu_min", "vnode_cpu_max"),
            ("vlink_bw_min", "vlink_bw_max"),
        )
        for lo, hi in ranges:
            if getattr(self, lo) > getattr(self, hi):
                raise ConfigError(f"{lo} must not exceed {hi}")
        if self.train_count + self.test_count > self.vnr_count:
            raise ConfigError("train_count + test_count must not exceed vnr_count")
        if not 0.0 <= self.inter_link_ratio <= 1.0:
            raise ConfigError("inter_link_ratio must lie in [0, 1]")
        if not 0.0 <= self.vlink_prob <= 1.0:
            raise ConfigError("vlink_prob must lie in [0, 1]")
        for name in ("arrival_rate", "mean_lifetime", "learning_rate", "metrics_interval"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {', '.join(POLICIES)}")

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name}={text}")
        return "\n".join(lines) + "\n"


def _field_types() -> dict[str, type]:
    types = {"int": int, "float": float, "str": str}
    return {f.name: types[f.type] for f in dataclasses.fields(ExperimentConfig)}


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    field_types = _field_types()
    values: dict[str, object] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in field_types:
            raise ConfigError(f"{source}:{line_no}: unknown key '{key}'")
        try:
            values[key] = field_types[key](value)
        except ValueError:
            raise ConfigError(f"{source}:{line_no}: bad value for '{key}'") from None
    config = ExperimentConfig(**values)
    config.validate()
    return config


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, source=str(path))


def apply_overrides(config: ExperimentConfig, overrides: dict[str, object]) -> ExperimentConfig:
    updated = dataclasses.replace(config, **overrides)
    updated.validate()
    return updated
