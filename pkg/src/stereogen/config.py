"""Pipeline configuration: a TOML file, overridable from the command line."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from stereogen.hac import LINKAGES, METRICS
from stereogen.ingest import DEFAULT_DELIMITER
from stereogen.kmodes import INITS
from stereogen.recs import MODES, split_kind
from stereogen.stereotype import WEIGHTINGS


def bundled(name: str) -> Path:
    """Path of a file shipped in ``stereogen/data``."""
    return Path(str(resources.files("stereogen") / "data" / name))


def stage_seed(root: int, stage: str) -> int:
    """Derive an independent per-stage seed from the root seed."""
    seq = np.random.SeedSequence([int(root), zlib.crc32(stage.encode())])
    return int(seq.generate_state(1)[0])


@dataclass(frozen=True)
class FeatureConfig:
    name: str
    min_count: int = 1
    delimiter: str = DEFAULT_DELIMITER


@dataclass(frozen=True)
class PipelineConfig:
    ratings: Path = field(default_factory=lambda: bundled("mini_ratings.csv"))
    catalog: Path = field(default_factory=lambda: bundled("mini_catalog.csv"))
    output: Path = Path("stereogen-out")
    features: tuple[FeatureConfig, ...] = (FeatureConfig("genre"), FeatureConfig("keywords", 2))
    simple_features: tuple[str, ...] | None = None
    metric: str = "linear"
    linkage: str = "ward"
    seed: int = 0
    kmodes_k: tuple[int, ...] = (5, 10)
    kmodes_init: str = "cao"
    kmodes_max_iter: int = 100
    kmodes_n_init: int = 1
    splits: tuple[str, ...] = ("new_user", "new_item")
    folds: int = 6
    modes: tuple[str, ...] = MODES
    weighting: str = "binary"

    def __post_init__(self) -> None:
        checks = [
            ("metric", self.metric, METRICS),
            ("linkage", self.linkage, LINKAGES),
            ("kmodes init", self.kmodes_init, INITS),
            ("weighting", self.weighting, WEIGHTINGS),
        ]
        for name, value, allowed in checks:
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")
        for mode in self.modes:
            if mode not in MODES:
                raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        object.__setattr__(self, "splits", tuple(split_kind(s) for s in self.splits))
        if self.kmodes_n_init < 1:
            raise ValueError("kmodes n_init must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not self.features:
            raise ValueError("at least one complex feature is required")
        for f in self.features:
            if f.min_count < 1:
                raise ValueError(f"min_count for {f.name} must be >= 1")

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def feature(self, name: str) -> FeatureConfig:
        for f in self.features:
            if f.name == name:
                return f
        return FeatureConfig(name)

    def seed_for(self, stage: str) -> int:
        return stage_seed(self.seed, stage)

    def override(self, **changes: Any) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _features_from(doc: list | dict) -> tuple[FeatureConfig, ...]:
    if isinstance(doc, dict):
        doc = [{"name": k, **v} for k, v in doc.items()]
    return tuple(
        FeatureConfig(f["name"], int(f.get("min_count", 1)), f.get("delimiter", DEFAULT_DELIMITER))
        for f in doc
    )


def load_config(path: str | Path) -> PipelineConfig:
    """Read a TOML config; relative paths resolve against the file's directory."""
    path = Path(path)
    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    base = path.parent
    kw: dict[str, Any] = {}
    paths = doc.get("paths", {})
    for key in ("ratings", "catalog", "output"):
        if key in paths:
            p = Path(paths[key])
            kw[key] = p if p.is_absolute() else base / p
    if "features" in doc:
        kw["features"] = _features_from(doc["features"])
    if "simple_features" in doc:
        kw["simple_features"] = tuple(doc["simple_features"])
    if "seed" in doc:
        kw["seed"] = int(doc["seed"])
    clustering = doc.get("clustering", {})
    for key in ("metric", "linkage"):
        if key in clustering:
            kw[key] = clustering[key]
    km = doc.get("kmodes", {})
    if "k" in km:
        kw["kmodes_k"] = tuple(int(k) for k in np.atleast_1d(km["k"]))
    if "init" in km:
        kw["kmodes_init"] = km["init"]
    if "max_iter" in km:
        kw["kmodes_max_iter"] = int(km["max_iter"])
    if "n_init" in km:
        kw["kmodes_n_init"] = int(km["n_init"])
    ev = doc.get("evaluation", {})
    if "splits" in ev or "split" in ev:
        kw["splits"] = tuple(np.atleast_1d(ev.get("splits", ev.get("split"))).tolist())
    if "folds" in ev:
        kw["folds"] = int(ev["folds"])
    if "modes" in ev:
        kw["modes"] = tuple(ev["modes"])
    if "weighting" in ev:
        kw["weighting"] = ev["weighting"]
    unknown = set(doc) - {"paths", "features", "simple_features", "seed", "clustering", "kmodes", "evaluation"}
    if unknown:
        raise ValueError(f"{path}: unknown config section(s) {sorted(unknown)}")
    return PipelineConfig(**kw)
