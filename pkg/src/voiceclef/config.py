"""Run configuration: a TOML file merged with command-line overrides.

Example file::

    seed = 7

    [features]
    n_mfcc = 40
    pre_emphasis = 0.97      # set to false to skip pre-emphasis

    [arch]
    preset = "default"       # or "paper-8192"
    conv_channels = 8

    [train]
    epochs = 60
    optimizer = "adam"
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field

from .classifier import PRESETS, ArchConfig, TrainConfig
from .errors import ConfigError, InvalidArch
from .features import FeatureConfig
from .vad import VadConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class SplitConfig:
    ratios: tuple = (0.8, 0.1, 0.1)
    grouped: bool = True


@dataclass(frozen=True)
class RunConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    vad: VadConfig = field(default_factory=VadConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    clip_len: float = 0.5
    seed: int = 0
    arch_preset: str = "default"

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "clip_len": self.clip_len,
            "arch_preset": self.arch_preset,
            "features": dataclasses.asdict(self.features),
            "arch": self.arch.to_dict(),
            "train": dataclasses.asdict(self.train),
            "vad": dataclasses.asdict(self.vad),
            "split": {"ratios": list(self.split.ratios), "grouped": self.split.grouped},
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _build(cls, values: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def _set_dotted(tree: dict, dotted: str, value) -> None:
    node = tree
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node.setdefault(p, {})
    node[leaf] = value


def resolve_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load ``path`` (TOML) and apply ``overrides`` keyed by dotted names.

    ``None`` values in ``overrides`` are ignored so optional CLI flags can be
    passed straight through.
    """
    tree: dict = {}
    if path:
        try:
            with open(path, "rb") as fh:
                tree = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(tree, key, value)

    known = {"features", "arch", "train", "vad", "split", "seed", "clip_len"}
    unknown = set(tree) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")

    feat = dict(tree.get("features", {}))
    if feat.get("pre_emphasis") is False:
        feat["pre_emphasis"] = None
    features = _build(FeatureConfig, feat, "features")

    arch_tree = dict(tree.get("arch", {}))
    preset = arch_tree.pop("preset", "default")
    if preset not in PRESETS:
        raise ConfigError(f"[arch] unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    seed = int(tree.get("seed", 0))
    clip_len = float(tree.get("clip_len", 0.5))

    train_tree = dict(tree.get("train", {}))
    train_tree.setdefault("seed", seed)
    train = _build(TrainConfig, train_tree, "train")
    vad = _build(VadConfig, dict(tree.get("vad", {})), "vad")
    split_tree = dict(tree.get("split", {}))
    if "ratios" in split_tree:
        split_tree["ratios"] = tuple(split_tree["ratios"])
    split = _build(SplitConfig, split_tree, "split")
    if abs(sum(split.ratios) - 1.0) > 1e-9:
        raise ConfigError("[split] ratios must sum to 1")

    if preset == "default" and "input_shape" not in arch_tree:
        n_samples = int(round(clip_len * features.sample_rate))
        arch_tree["input_shape"] = (1, features.n_rows, features.n_frames(n_samples))
    unknown = set(arch_tree) - {f.name for f in dataclasses.fields(ArchConfig)}
    if unknown:
        raise ConfigError(f"[arch] unknown key(s): {', '.join(sorted(unknown))}")
    try:
        arch = dataclasses.replace(PRESETS[preset], **arch_tree)
    except (TypeError, ValueError, InvalidArch) as exc:
        raise ConfigError(f"[arch] {exc}") from exc
    return RunConfig(features, arch, train, vad, split, clip_len, seed, preset)
