"""Project configuration (a single JSON file)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .evaluation import LearnerConfig
from .features import FeatureParams

PROFILES = {
    "default": {"priors_on_full_dataset": False, "out_of_fold_bins": False},
    # corpus-wide detection priors with resubstitution bins
    "paper_replication": {"priors_on_full_dataset": True, "out_of_fold_bins": False},
}


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    raw_records: str = "raw.jsonl"
    assets_root: str = "."
    output_dir: str = "out"


@dataclass
class Config:
    paths: Paths = field(default_factory=Paths)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    balance_seed: int = 0
    split_fraction: float = 0.8
    rng: str = "PCG64"
    workers: int = 1
    profile: str = "default"
    features: FeatureParams = field(default_factory=FeatureParams)
    learners: LearnerConfig = field(default_factory=LearnerConfig)
    priors_on_full_dataset: bool = False
    out_of_fold_bins: bool = False
    extremes_k: int = 200
    base_dir: Path = field(default=Path("."), repr=False)

    def path(self, name: str) -> Path:
        p = Path(getattr(self.paths, name))
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_dir(self) -> Path:
        return self.path("output_dir")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


def _merge(dataclass_obj, values: dict, where: str):
    known = set(dataclass_obj.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    for k, v in values.items():
        setattr(dataclass_obj, k, v)


def config_from_dict(obj: dict, base_dir: Path = Path(".")) -> Config:
    obj = dict(obj)
    cfg = Config(base_dir=Path(base_dir))
    profile = obj.pop("profile", "default")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    cfg.profile = profile
    for k, v in PROFILES[profile].items():
        setattr(cfg, k, v)
    _merge(cfg.paths, obj.pop("paths", {}), "paths")
    _merge(cfg.features, obj.pop("features", {}), "features")
    learners = obj.pop("learners", {})
    for kind in ("svm", "tree", "logreg"):
        getattr(cfg.learners, kind).update(learners.pop(kind, {}))
    cfg.learners.overrides = {str(k): v for k, v in learners.pop("overrides", {}).items()}
    if learners:
        raise ConfigError(f"unknown key(s) in learners: {sorted(learners)}")
    _merge(cfg, obj, "config")
    if not cfg.seeds:
        raise ConfigError("seeds must be non-empty")
    if cfg.rng != "PCG64":
        raise ConfigError("only the PCG64 generator is supported")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(obj, path.parent)
