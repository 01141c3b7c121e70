"""Predictive distributions: Monte-Carlo Laplace (LA) and linearised Laplace (LLA).

A :class:`PredictiveDist` describes a batch of test points. Gaussian
predictives carry one mean and variance per point; mixtures carry ``S``
equally weighted component means per point sharing one noise variance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .cpd import CpdModel, FeatureSet, build_features, design_matrices, model_response
from .errors import InvalidData
from .hessian import HessianVariant
from .inference import LaplacePosterior, sample_posterior

LOG_2PI = np.log(2 * np.pi)
DEFAULT_DRAWS = 2000


@dataclass
class PredictiveDist:
    kind: str  # "gaussian" or "mixture"
    mean: np.ndarray  # (M,) or (M, S)
    variance: np.ndarray  # (M,) total variance, or (M,) per-component noise variance

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.variance = np.broadcast_to(np.asarray(self.variance, dtype=float), self.mean.shape[:1]).copy()
        if self.kind not in ("gaussian", "mixture"):
            raise ValueError(f"unknown predictive kind {self.kind!r}")
        if self.kind == "mixture" and self.mean.ndim != 2:
            raise ValueError("mixture means must be an M x S array")
        if np.any(~(self.variance > 0)):
            raise InvalidData("predictive variances must be positive")

    @classmethod
    def gaussian(cls, mean, variance) -> "PredictiveDist":
        return cls("gaussian", np.atleast_1d(mean), np.atleast_1d(variance))

    @classmethod
    def mixture(cls, means, noise_variance) -> "PredictiveDist":
        return cls("mixture", np.atleast_2d(means), noise_variance)

    def __len__(self):
        return self.mean.shape[0]

    def __getitem__(self, idx) -> "PredictiveDist":
        idx = np.atleast_1d(np.arange(len(self))[idx])
        return PredictiveDist(self.kind, self.mean[idx], self.variance[idx])

    @property
    def n_components(self) -> int:
        return 1 if self.kind == "gaussian" else self.mean.shape[1]

    def point(self) -> np.ndarray:
        """Predictive mean per test point."""
        return self.mean if self.kind == "gaussian" else self.mean.mean(axis=1)

    def total_variance(self) -> np.ndarray:
        if self.kind == "gaussian":
            return self.variance
        return self.variance + self.mean.var(axis=1)

    def logpdf(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "gaussian":
            return -0.5 * (LOG_2PI + np.log(self.variance)) - (y - self.mean) ** 2 / (2 * self.variance)
        var = self.variance[:, None]
        comp = -0.5 * (LOG_2PI + np.log(var)) - (y[:, None] - self.mean) ** 2 / (2 * var)
        return special.logsumexp(comp, axis=1) - np.log(self.mean.shape[1])

    def draws(self, n_draws=DEFAULT_DRAWS, seed=0) -> np.ndarray:
        """Resampled predictive draws (M x n_draws).

        Every test point uses the same underlying random numbers, so results do
        not depend on the order or number of test points.
        """
        rng = np.random.default_rng(seed)
        comp = rng.integers(self.n_components, size=n_draws)
        z = rng.standard_normal(n_draws)
        means = self.mean[:, None] if self.kind == "gaussian" else self.mean[:, comp]
        return means + np.sqrt(self.variance)[:, None] * z[None, :]


def interval(dist: PredictiveDist, level: float, seed=0, n_draws=DEFAULT_DRAWS):
    """Central ``level`` predictive interval per test point, as ``(lower, upper)`` arrays.

    Gaussian intervals are exact; mixture intervals are empirical percentiles
    of seeded resampled draws.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie strictly between 0 and 1")
    if dist.kind == "gaussian":
        half = stats.norm.ppf(0.5 + level / 2) * np.sqrt(dist.variance)
        return dist.mean - half, dist.mean + half
    d = dist.draws(n_draws, seed)
    tail = 100 * (1 - level) / 2
    lo, hi = np.percentile(d, [tail, 100 - tail], axis=1)
    return lo, hi


def intervals(dist: PredictiveDist, levels, seed=0, n_draws=DEFAULT_DRAWS):
    """Intervals for several levels; mixtures reuse one set of draws for all of them."""
    levels = list(levels)
    if dist.kind == "gaussian":
        return [interval(dist, a) for a in levels]
    for a in levels:
        if not 0 < a < 1:
            raise ValueError("levels must lie strictly between 0 and 1")
    d = dist.draws(n_draws, seed)
    out = []
    for a in levels:
        tail = 100 * (1 - a) / 2
        lo, hi = np.percentile(d, [tail, 100 - tail], axis=1)
        out.append((lo, hi))
    return out


def _as_features(model: CpdModel, X) -> FeatureSet:
    if isinstance(X, FeatureSet):
        return X
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if X.size == model.D else X[:, None]
    return build_features(X, model.feature_spec)


def jacobian(model: CpdModel, X) -> np.ndarray:
    """Gradient of the response with respect to all parameters, one row per input."""
    return np.hstack(design_matrices(model, _as_features(model, X)))


def grad_f(model: CpdModel, x, variant=HessianVariant.GGN) -> np.ndarray:
    """Gradient of ``f(x, v)`` at the model's parameters over the variant's covered parameters.

    For a single input ``x`` (length D) a vector is returned, for a batch a matrix.
    """
    variant = HessianVariant.parse(variant)
    single = np.ndim(x) == 1 and np.size(x) == model.D
    J = jacobian(model, x)
    if variant is HessianVariant.LAST:
        J = J[:, model.core_slice(model.D - 1)]
    return J[0] if single else J


def predict_lla(post: LaplacePosterior, X) -> PredictiveDist:
    fs = _as_features(post.mean, X)
    mean = model_response(post.mean, fs)
    if post.rank == 0:
        var = np.zeros(fs.N)
    else:
        J = jacobian(post.mean, fs)
        var = sum(f.quad_inverse(J) for f in post.factors)
    return PredictiveDist.gaussian(mean, var + post.noise_variance)


def predict_la(post: LaplacePosterior, X, S=500, seed=0) -> PredictiveDist:
    fs = _as_features(post.mean, X)
    samples = sample_posterior(post, S, seed) if post.rank else np.tile(post.mean.params(), (S, 1))
    means = np.column_stack([model_response(post.mean.with_params(v), fs) for v in samples])
    return PredictiveDist.mixture(means, np.full(fs.N, post.noise_variance))


def predict(post: LaplacePosterior, X, mode="lla", S=500, seed=0) -> PredictiveDist:
    if mode == "lla":
        return predict_lla(post, X)
    if mode == "la":
        return predict_la(post, X, S, seed)
    raise ValueError(f"unknown predictive mode {mode!r}")


def rescale(dist: PredictiveDist, loc: float, scale: float) -> PredictiveDist:
    """Distribution of ``loc + scale * y`` (undoing target standardisation)."""
    return PredictiveDist(dist.kind, loc + scale * dist.mean, scale**2 * dist.variance)
