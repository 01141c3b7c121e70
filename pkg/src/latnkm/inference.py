"""Variational Gamma updates for the precisions and Laplace posterior assembly."""
from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .als import init_model, run_als
from .config import ExperimentConfig
from .cpd import CpdModel, FeatureMapSpec, FeatureSet, build_features, model_response
from .hessian import HessianMatrix, HessianVariant, TruncatedEig, compute_hessian, max_eigenvalue, truncate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GammaPosterior:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Gamma parameters must be positive (a={self.a}, b={self.b})")

    @property
    def mean(self) -> float:
        return self.a / self.b


def update_beta(q: GammaPosterior, N: int, expected_sq_residual: float) -> GammaPosterior:
    if expected_sq_residual < 0:
        raise ValueError("expected squared residual must be nonnegative")
    return GammaPosterior(q.a + N / 2, q.b + 0.5 * expected_sq_residual)


def update_gamma(q: GammaPosterior, D: int, I: int, R: int, expected_sq_norm: float) -> GammaPosterior:
    if expected_sq_norm < 0:
        raise ValueError("expected squared norm must be nonnegative")
    return GammaPosterior(q.a + D * I * R / 2, q.b + 0.5 * expected_sq_norm)


@dataclass
class LaplacePosterior:
    """Gaussian over the CPD parameters centred at the MAP cores.

    ``beta``/``gamma`` are the precisions the Hessian was built with; the
    matching ``q_beta``/``q_gamma`` are ``None`` when that precision was fixed
    by the user instead of learned.
    """

    mean: CpdModel
    variant: HessianVariant
    factors: list[TruncatedEig]
    t_hat: float
    beta: float
    gamma: float
    q_beta: GammaPosterior | None = None
    q_gamma: GammaPosterior | None = None
    hessian: HessianMatrix | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def feature_spec(self) -> FeatureMapSpec:
        return self.mean.feature_spec

    @property
    def noise_variance(self) -> float:
        return 1.0 / self.beta

    @property
    def rank(self) -> int:
        return sum(f.rank for f in self.factors)

    def rethreshold(self, t_hat: float) -> "LaplacePosterior":
        """Same posterior truncated at a different absolute threshold."""
        if self.hessian is None:
            raise ValueError("posterior was stored without its Hessian; cannot re-truncate")
        return dataclasses.replace(self, factors=truncate(self.hessian, t_hat), t_hat=float(t_hat))


def _fixed_or_mean(fixed, q):
    return float(fixed) if fixed is not None else q.mean


@dataclass
class PointFit:
    """MAP cores together with the precisions reached by the variational loop."""

    model: CpdModel
    features: FeatureSet
    y: np.ndarray
    beta: float
    gamma: float
    q_beta: GammaPosterior | None
    q_gamma: GammaPosterior | None
    history: dict


def fit_point(X, y, cfg: ExperimentConfig, features: FeatureSet | None = None) -> PointFit:
    """Alternate warm-started ALS fits with Gamma updates of the learned precisions.

    Each round refits the cores with the current ``E[beta]``, ``E[gamma]``
    and then adds one round of counts and plug-in statistics (residual sum of
    squares, squared parameter norm at the new MAP point) to the Gamma
    posteriors. ``vi_rounds = 0`` runs one ALS fit and never updates.
    """
    spec = cfg.feature_spec()
    fs = build_features(X, spec) if features is None else features
    y = np.asarray(y, dtype=float)
    N = fs.N
    D, I, R = fs.D, cfg.local_dim, cfg.rank

    prior = GammaPosterior(cfg.prior_shape, cfg.prior_rate)
    q_beta = None if cfg.beta is not None else prior
    q_gamma = None if cfg.gamma is not None else prior
    beta = _fixed_or_mean(cfg.beta, q_beta)
    gamma = _fixed_or_mean(cfg.gamma, q_gamma)

    model = init_model(D, spec, R, cfg.seed, cfg.init_scale)
    history = {"beta": [beta], "gamma": [gamma], "loss": [], "sweeps": []}
    for t in range(max(cfg.vi_rounds, 1)):
        est = run_als(model, fs, y, beta, gamma, cfg.epochs)
        model = est.model
        history["loss"].append(est.final_loss)
        history["sweeps"].append(est.epochs_run)
        if cfg.vi_rounds == 0:
            break
        resid = y - model_response(model, fs)
        v = model.params()
        if q_beta is not None:
            q_beta = update_beta(q_beta, N, float(resid @ resid))
            beta = q_beta.mean
        if q_gamma is not None:
            q_gamma = update_gamma(q_gamma, D, I, R, float(v @ v))
            gamma = q_gamma.mean
        history["beta"].append(beta)
        history["gamma"].append(gamma)
        log.debug("VI round %d: E[beta]=%.4g E[gamma]=%.4g", t + 1, beta, gamma)
    return PointFit(model, fs, y, beta, gamma, q_beta, q_gamma, history)


def laplace(fit: PointFit, variant, threshold: float, relative: bool = False) -> LaplacePosterior:
    """Laplace posterior at the MAP point of ``fit`` for one Hessian variant."""
    variant = HessianVariant.parse(variant)
    H = compute_hessian(fit.model, fit.features, fit.y, fit.beta, fit.gamma, variant)
    lam_max = max_eigenvalue(H)
    t_hat = threshold * lam_max if relative else threshold
    diagnostics = dict(fit.history, lambda_max=lam_max)
    return LaplacePosterior(
        mean=fit.model,
        variant=variant,
        factors=truncate(H, t_hat),
        t_hat=float(t_hat),
        beta=fit.beta,
        gamma=fit.gamma,
        q_beta=fit.q_beta,
        q_gamma=fit.q_gamma,
        hessian=H,
        diagnostics=diagnostics,
    )


def fit_bayes(X, y, cfg: ExperimentConfig, features: FeatureSet | None = None) -> LaplacePosterior:
    fit = fit_point(X, y, cfg, features)
    return laplace(fit, cfg.variant, cfg.threshold, cfg.threshold_relative)


def sample_posterior(post: LaplacePosterior, S: int, seed) -> np.ndarray:
    """Draw ``S`` parameter vectors (rows). Uncovered or truncated directions stay at v*."""
    if S < 1:
        raise ValueError("S must be >= 1")
    rng = np.random.default_rng(seed)
    v_star = post.mean.params()
    out = np.tile(v_star, (S, 1))
    if post.rank == 0:
        warnings.warn("posterior retains no eigenpairs; every sample equals the MAP point", stacklevel=2)
        return out
    for f in post.factors:
        eps = rng.standard_normal((S, f.rank))
        out += f.perturb(eps, v_star.size)
    return out
