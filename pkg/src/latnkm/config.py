"""Experiment configuration: a flat JSON document plus command-line overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cpd import FEATURE_KINDS, FeatureMapSpec
from .errors import ConfigError
from .hessian import HessianVariant

SYNTHETIC_CUBIC = "synthetic-cubic"
MODES = ("la", "lla")


@dataclass
class ExperimentConfig:
    dataset: str = SYNTHETIC_CUBIC
    target_column: str | None = None
    rank: int = 2
    local_dim: int = 4
    # None picks raw monomials for the synthetic cubic task and unit-norm ones otherwise
    feature_map: str | None = None
    hessian: str = "last"
    # absolute eigenvalue cut, or a multiple of the largest eigenvalue when threshold_relative
    threshold: float = 1e-5
    threshold_relative: bool = True
    mode: str = "lla"
    samples: int = 500
    epochs: int = 25
    vi_rounds: int = 5
    beta: float | None = None  # fixes the noise precision (no VI update) when set
    gamma: float | None = None  # fixes the weight precision when set
    prior_shape: float = 1e-6
    prior_rate: float = 1e-6
    init_scale: float | None = None
    train_frac: float = 0.9
    repeats: int = 1
    seed: int = 0
    folds: int = 5
    rank_grid: list[int] = field(default_factory=list)
    local_dim_grid: list[int] = field(default_factory=list)
    threshold_grid: list[float] = field(default_factory=list)
    raw_scale: bool = False
    drop_constant: bool = False
    interval_draws: int = 2000
    out: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.rank, int) and self.rank >= 1, f"rank must be an integer >= 1 (got {self.rank!r})")
        need(isinstance(self.local_dim, int) and self.local_dim >= 1, f"local_dim must be an integer >= 1 (got {self.local_dim!r})")
        need(isinstance(self.samples, int) and self.samples >= 1, "samples must be >= 1")
        need(isinstance(self.epochs, int) and self.epochs >= 1, "epochs must be >= 1")
        need(isinstance(self.vi_rounds, int) and self.vi_rounds >= 0, "vi_rounds must be >= 0")
        need(isinstance(self.repeats, int) and self.repeats >= 1, "repeats must be >= 1")
        need(isinstance(self.folds, int) and self.folds >= 2, "folds must be >= 2")
        need(0 < self.train_frac < 1, "train_frac must lie strictly between 0 and 1")
        need(self.mode in MODES, f"mode must be one of {MODES}")
        need(self.beta is None or self.beta > 0, "beta must be positive")
        need(self.gamma is None or self.gamma > 0, "gamma must be positive")
        need(self.prior_shape > 0 and self.prior_rate > 0, "Gamma hyperprior parameters must be positive")
        need(self.interval_draws >= 10, "interval_draws must be >= 10")
        need(all(isinstance(r, int) and r >= 1 for r in self.rank_grid), "rank_grid entries must be >= 1")
        need(all(isinstance(i, int) and i >= 1 for i in self.local_dim_grid), "local_dim_grid entries must be >= 1")
        need(self.feature_map in (None,) + FEATURE_KINDS, f"feature_map must be one of {FEATURE_KINDS}")
        self.hessian = HessianVariant.parse(self.hessian).value

    @property
    def feature_kind(self) -> str:
        if self.feature_map is not None:
            return self.feature_map
        return "polynomial" if self.dataset == SYNTHETIC_CUBIC else "unit_norm_polynomial"

    def feature_spec(self) -> FeatureMapSpec:
        return FeatureMapSpec(self.local_dim, self.feature_kind)

    @property
    def variant(self) -> HessianVariant:
        return HessianVariant(self.hessian)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)
