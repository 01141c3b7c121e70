"""Independent ground truth for the test suites.

Central finite differences and brute-force dense expansions. Nothing here is
used by the fitting code paths; these functions exist so that the analytic
derivatives and the structured CPD algebra can be checked against something
that shares no code with them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpd import DENSE_CAP, CpdModel, FeatureSet, dense_weights
from .errors import NumericalError, TooLarge


@dataclass(frozen=True)
class FdConfig:
    h0: float

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")

    def steps(self, v):
        return self.h0 * (1.0 + np.abs(v))


GRADIENT_FD = FdConfig(1e-6)
HESSIAN_FD = FdConfig(1e-4)


def _eval(J, v):
    val = float(J(v))
    if not np.isfinite(val):
        raise NumericalError(f"objective is not finite at the probe point ({val})")
    return val


def finite_diff_gradient(J, v, cfg: FdConfig = GRADIENT_FD) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    h = cfg.steps(v)
    g = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h[i]
        g[i] = (_eval(J, v + e) - _eval(J, v - e)) / (2 * h[i])
    return g


def finite_diff_hessian(J, v, cfg: FdConfig = HESSIAN_FD) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = v.size
    h = cfg.steps(v)
    H = np.empty((n, n))
    f0 = _eval(J, v)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (_eval(J, v + ei) - 2 * f0 + _eval(J, v - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            val = (
                _eval(J, v + ei + ej)
                - _eval(J, v + ei - ej)
                - _eval(J, v - ei + ej)
                + _eval(J, v - ei - ej)
            ) / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return H


def dense_features(fs: FeatureSet, cap: int = DENSE_CAP) -> np.ndarray:
    """Rows ``phi[D-1](x) (x) ... (x) phi[0](x)``, shape ``N x I**D``."""
    if fs.I**fs.D > cap:
        raise TooLarge(f"dense feature map has {fs.I ** fs.D} columns (cap {cap})")
    rows = np.ones((fs.N, 1))
    for p in fs.phi:
        rows = np.einsum("ni,nj->nij", p, rows).reshape(fs.N, -1)
    return rows


def dense_response(model: CpdModel, fs: FeatureSet) -> np.ndarray:
    return dense_features(fs) @ dense_weights(model)


def dense_loss(model: CpdModel, fs: FeatureSet, y, beta, gamma) -> float:
    r = np.asarray(y, dtype=float) - dense_response(model, fs)
    v = model.params()
    return 0.5 * beta * r @ r + 0.5 * gamma * v @ v
