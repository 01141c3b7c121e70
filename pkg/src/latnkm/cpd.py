"""CPD kernel machine algebra.

Conventions used throughout the package:

* Cores are ``I x R`` matrices ``V[d]``; the flattened core ``v[d]`` is the
  column-major vectorisation, so entry ``(i, r)`` sits at ``i + r * I``.
* The full parameter vector is ``concat(v[0], ..., v[D-1])`` (length ``D*I*R``).
* Dense weights / features use the Kronecker order ``x[D-1] (x) ... (x) x[0]``,
  i.e. the index of the first dimension runs fastest.

Core indices are zero-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidData, ShapeError, TooLarge

DENSE_CAP = 10**6


FEATURE_KINDS = ("unit_norm_polynomial", "polynomial")


@dataclass(frozen=True)
class FeatureMapSpec:
    """Per-dimension feature map.

    ``unit_norm_polynomial`` maps ``x`` to the monomials ``1, x, ..., x**(I-1)``
    rescaled to unit Euclidean norm; ``polynomial`` keeps the raw monomials
    (used for unnormalised data such as the synthetic cubic task, where a
    bounded map cannot extrapolate).
    """

    local_dim: int
    kind: str = "unit_norm_polynomial"

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature map kind {self.kind!r}")
        if int(self.local_dim) < 1:
            raise ValueError("local_dim must be >= 1")


@dataclass
class FeatureSet:
    phi: list[np.ndarray]

    def __post_init__(self):
        if not self.phi:
            raise ShapeError("feature set needs at least one dimension")
        n = self.phi[0].shape[0]
        for p in self.phi:
            if p.ndim != 2 or p.shape[0] != n:
                raise ShapeError("all feature matrices must be 2-D with the same row count")

    @property
    def N(self) -> int:
        return self.phi[0].shape[0]

    @property
    def D(self) -> int:
        return len(self.phi)

    @property
    def I(self) -> int:
        return self.phi[0].shape[1]

    def subset(self, idx) -> "FeatureSet":
        return FeatureSet([p[idx] for p in self.phi])


def polynomial_features(x: np.ndarray, local_dim: int, normalize: bool = True) -> np.ndarray:
    """Monomials ``1, x, ..., x**(I-1)``, by default scaled so every row has unit norm."""
    x = np.asarray(x, dtype=float)
    powers = x[:, None] ** np.arange(local_dim)[None, :]
    if not normalize:
        return powers
    norms = np.linalg.norm(powers, axis=1, keepdims=True)
    # the constant monomial keeps every row nonzero
    return powers / norms


def build_features(X, spec: FeatureMapSpec) -> FeatureSet:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"expected an N x D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidData("inputs contain NaN or Inf")
    normalize = spec.kind == "unit_norm_polynomial"
    return FeatureSet([polynomial_features(X[:, d], spec.local_dim, normalize) for d in range(X.shape[1])])


@dataclass
class CpdModel:
    cores: list[np.ndarray]
    feature_spec: FeatureMapSpec = field(default=None)

    def __post_init__(self):
        if not self.cores:
            raise ShapeError("a CPD model needs at least one core")
        self.cores = [np.asarray(c, dtype=float) for c in self.cores]
        shape = self.cores[0].shape
        if len(shape) != 2 or min(shape) < 1:
            raise ShapeError(f"cores must be nonempty I x R matrices, got {shape}")
        for c in self.cores:
            if c.shape != shape:
                raise ShapeError("all cores must share the same I x R shape")
        if self.feature_spec is None:
            self.feature_spec = FeatureMapSpec(shape[0])
        elif self.feature_spec.local_dim != shape[0]:
            raise ShapeError("core row count does not match feature_spec.local_dim")

    @property
    def D(self) -> int:
        return len(self.cores)

    @property
    def I(self) -> int:
        return self.cores[0].shape[0]

    @property
    def R(self) -> int:
        return self.cores[0].shape[1]

    @property
    def n_params(self) -> int:
        return self.D * self.I * self.R

    def core_slice(self, d: int) -> slice:
        size = self.I * self.R
        return slice(d * size, (d + 1) * size)

    def params(self) -> np.ndarray:
        return np.concatenate([c.reshape(-1, order="F") for c in self.cores])

    def with_params(self, v) -> "CpdModel":
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got shape {v.shape}")
        cores = [v[self.core_slice(d)].reshape(self.I, self.R, order="F") for d in range(self.D)]
        return CpdModel(cores, self.feature_spec)

    def copy(self) -> "CpdModel":
        return CpdModel([c.copy() for c in self.cores], self.feature_spec)

    @classmethod
    def random(cls, D, I, R, rng=None, scale=None, spec=None) -> "CpdModel":
        rng = np.random.default_rng(rng)
        scale = R ** (-0.5 / D) if scale is None else scale
        return cls([scale * rng.standard_normal((I, R)) for _ in range(D)], spec)


def _check(model: CpdModel, fs: FeatureSet):
    if fs.D != model.D or fs.I != model.I:
        raise ShapeError(
            f"model has D={model.D}, I={model.I} but features have D={fs.D}, I={fs.I}"
        )


def projections(model: CpdModel, fs: FeatureSet) -> list[np.ndarray]:
    """Per-dimension ``Phi[d] @ V[d]`` (each N x R)."""
    _check(model, fs)
    return [p @ c for p, c in zip(fs.phi, model.cores)]


def leave_one_out_products(P: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Hadamard products of all but one factor, via prefix/suffix scans (no division)."""
    D = len(P)
    ones = np.ones_like(P[0])
    prefix = [ones]
    for d in range(D - 1):
        prefix.append(prefix[-1] * P[d])
    out = [None] * D
    suffix = ones
    for d in range(D - 1, -1, -1):
        out[d] = prefix[d] * suffix
        suffix = suffix * P[d]
    return out


def model_response(model: CpdModel, fs: FeatureSet) -> np.ndarray:
    Z = np.prod(np.stack(projections(model, fs)), axis=0)
    return Z.sum(axis=1)


def khatri_rao_rows(Z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Row-wise Khatri-Rao product; column ``r * I + i`` holds ``Z[:, r] * phi[:, i]``."""
    N = Z.shape[0]
    return np.einsum("nr,ni->nri", Z, phi).reshape(N, -1)


def partial_response(model: CpdModel, fs: FeatureSet, d: int):
    """Return ``(Z_d, A_d)`` for core ``d`` such that ``A_d @ v[d]`` is the model response."""
    if not 0 <= d < model.D:
        raise IndexError(f"core index {d} out of range for D={model.D}")
    P = projections(model, fs)
    Z = np.ones((fs.N, model.R))
    for k, p in enumerate(P):
        if k != d:
            Z = Z * p
    return Z, khatri_rao_rows(Z, fs.phi[d])


def design_matrices(model: CpdModel, fs: FeatureSet) -> list[np.ndarray]:
    """All ``A_d`` at once, sharing the leave-one-out products."""
    Zs = leave_one_out_products(projections(model, fs))
    return [khatri_rao_rows(Z, p) for Z, p in zip(Zs, fs.phi)]


def dense_weights(model: CpdModel, cap: int = DENSE_CAP) -> np.ndarray:
    size = model.I**model.D
    if size > cap:
        raise TooLarge(f"dense expansion has {size} entries (cap {cap})")
    w = np.zeros(size)
    for r in range(model.R):
        term = np.ones(1)
        for c in model.cores:
            term = np.kron(c[:, r], term)
        w += term
    return w
