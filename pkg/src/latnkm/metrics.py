"""Accuracy and calibration metrics for regression predictives."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .predictive import DEFAULT_DRAWS, PredictiveDist, interval, intervals

RCE_LEVELS = tuple(np.round(np.arange(0.50, 0.951, 0.05), 2).tolist())


@dataclass
class MetricReport:
    rmse: float
    nll: float
    ecp95: float
    wcpi95: float
    rce: float
    coverage_table: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coverage_table"] = [list(p) for p in self.coverage_table]
        return d

    def scalars(self) -> dict:
        return {k: getattr(self, k) for k in ("rmse", "nll", "ecp95", "wcpi95", "rce")}


def _vec(a, name):
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise ValueError(f"{name} is empty")
    return a


def rmse(y, yhat) -> float:
    y, yhat = _vec(y, "y"), _vec(yhat, "yhat")
    if y.shape != yhat.shape:
        raise ValueError("y and yhat differ in length")
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def nll(dist: PredictiveDist, y) -> float:
    y = _vec(y, "y")
    if len(dist) != y.size:
        raise ValueError("need one predictive per target")
    return float(-np.mean(dist.logpdf(y)))


def interval_coverage(y, lower, upper) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.mean((y >= lower) & (y <= upper)))


def coverage(dist: PredictiveDist, y, level=0.95, seed=0, n_draws=DEFAULT_DRAWS) -> float:
    lo, hi = interval(dist, level, seed, n_draws)
    return interval_coverage(_vec(y, "y"), lo, hi)


def wcpi(dist: PredictiveDist, level=0.95, seed=0, n_draws=DEFAULT_DRAWS) -> float:
    lo, hi = interval(dist, level, seed, n_draws)
    return float(np.mean(hi - lo))


def coverage_curve(dist: PredictiveDist, y, levels=RCE_LEVELS, seed=0, n_draws=DEFAULT_DRAWS):
    y = _vec(y, "y")
    return [(float(a), interval_coverage(y, lo, hi)) for a, (lo, hi) in zip(levels, intervals(dist, levels, seed, n_draws))]


def calibration_error(curve) -> float:
    if not curve:
        raise ValueError("need at least one coverage level")
    return float(np.mean([abs(c - a) for a, c in curve]))


def rce(dist: PredictiveDist, y, levels=RCE_LEVELS, seed=0, n_draws=DEFAULT_DRAWS) -> float:
    levels = list(levels)
    if not levels:
        raise ValueError("need at least one coverage level")
    return calibration_error(coverage_curve(dist, y, levels, seed, n_draws))


def evaluate(dist: PredictiveDist, y, levels=RCE_LEVELS, seed=0, n_draws=DEFAULT_DRAWS) -> MetricReport:
    y = _vec(y, "y")
    lo, hi = interval(dist, 0.95, seed, n_draws)
    curve = coverage_curve(dist, y, levels, seed, n_draws)
    return MetricReport(
        rmse=rmse(y, dist.point()),
        nll=nll(dist, y),
        ecp95=interval_coverage(y, lo, hi),
        wcpi95=float(np.mean(hi - lo)),
        rce=calibration_error(curve),
        coverage_table=curve,
    )
