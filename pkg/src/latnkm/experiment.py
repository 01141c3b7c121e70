"""Experiment protocols behind the command-line runner.

Every function here is deterministic given the config: repeat ``i`` uses seed
``config.seed + i`` for the split, the initialisation and Monte-Carlo draws.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import SYNTHETIC_CUBIC, ExperimentConfig
from .data import Dataset, gen_cubic, kfold_indices, load_csv, split
from .errors import LatnkmError, ShapeError
from .hessian import DENSE_HESSIAN_CAP, HessianVariant
from .inference import LaplacePosterior, fit_point, laplace
from .metrics import RCE_LEVELS, MetricReport, evaluate, nll
from .predictive import PredictiveDist, predict, rescale

log = logging.getLogger(__name__)

METRIC_KEYS = ("rmse", "nll", "ecp95", "wcpi95", "rce")
CV_NOTE = "cross-validation: {k}-fold on the training split, selected by mean validation NLL; ties -> smaller R, smaller I, larger threshold"


def load_split(cfg: ExperimentConfig, seed: int) -> tuple[Dataset, Dataset]:
    """Train/test pair for one repeat (standardised unless synthetic)."""
    if cfg.dataset == SYNTHETIC_CUBIC:
        return gen_cubic(seed)
    ds = load_csv(cfg.dataset, cfg.target_column, cfg.drop_constant)
    return split(ds, cfg.train_frac, seed)


def _report_scale(dist: PredictiveDist, y, ds: Dataset, raw: bool):
    if raw and ds.standardizer is not None:
        st = ds.standardizer
        return rescale(dist, st.y_mean, st.y_std), st.inverse_y(y)
    return dist, y


def evaluate_posterior(post: LaplacePosterior, test: Dataset, cfg: ExperimentConfig, seed: int) -> MetricReport:
    if test.D != post.mean.D:
        raise ShapeError(f"model expects D={post.mean.D} inputs but the data has D={test.D}")
    dist = predict(post, test.X, cfg.mode, cfg.samples, seed)
    dist, y = _report_scale(dist, test.y, test, cfg.raw_scale)
    return evaluate(dist, y, RCE_LEVELS, seed, cfg.interval_draws)


def fit_posterior(cfg: ExperimentConfig, train: Dataset) -> LaplacePosterior:
    return laplace(fit_point(train.X, train.y, cfg), cfg.variant, cfg.threshold, cfg.threshold_relative)


@dataclass
class RepeatResult:
    seed: int
    report: MetricReport
    selected: dict | None = None


@dataclass
class EvalSummary:
    rows: list[RepeatResult]
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows):
        vals = {k: np.array([getattr(r.report, k) for r in rows]) for k in METRIC_KEYS}
        return cls(rows, {k: float(v.mean()) for k, v in vals.items()}, {k: float(v.std()) for k, v in vals.items()})

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"seed": r.seed, **r.report.to_dict(), **({} if r.selected is None else {"selected": r.selected})}
                for r in self.rows
            ],
            "mean": self.mean,
            "std": self.std,
        }


def has_grid(cfg: ExperimentConfig) -> bool:
    return bool(cfg.rank_grid or cfg.local_dim_grid or cfg.threshold_grid)


def run_protocol(cfg: ExperimentConfig) -> EvalSummary:
    """Split, fit and score ``cfg.repeats`` times with seeds ``seed, seed+1, ...``.

    When any grid is set, each repeat first picks rank, local dimension and
    threshold by cross-validation on its own training split.
    """
    rows = []
    for i in range(cfg.repeats):
        seed = cfg.seed + i
        train, test = load_split(cfg, seed)
        run_cfg = cfg.replace(seed=seed)
        selected = None
        if has_grid(cfg):
            best, _ = cross_validate(run_cfg, train)
            if best is None:
                raise LatnkmError(f"repeat {i}: every cross-validation cell failed")
            run_cfg = best
            selected = {"rank": best.rank, "local_dim": best.local_dim, "threshold": best.threshold}
        post = fit_posterior(run_cfg, train)
        rows.append(RepeatResult(seed, evaluate_posterior(post, test, run_cfg, seed), selected))
        log.info("repeat %d (seed %d): %s", i, seed, rows[-1].report.scalars())
    return EvalSummary.from_rows(rows)


def evaluate_artifact(post: LaplacePosterior, cfg: ExperimentConfig, test: Dataset) -> EvalSummary:
    """Score a stored posterior; repeats only vary the Monte-Carlo seeds."""
    rows = []
    for i in range(cfg.repeats):
        seed = cfg.seed + i
        rows.append(RepeatResult(seed, evaluate_posterior(post, test, cfg, seed)))
    return EvalSummary.from_rows(rows)


@dataclass
class CvCell:
    rank: int
    local_dim: int
    threshold: float
    nll: float | None
    fold_nll: list[float]
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.nll is not None and np.isfinite(self.nll)


def _grid(cfg: ExperimentConfig):
    ranks = cfg.rank_grid or [cfg.rank]
    dims = cfg.local_dim_grid or [cfg.local_dim]
    thresholds = cfg.threshold_grid or [cfg.threshold]
    return ranks, dims, thresholds


def cross_validate(cfg: ExperimentConfig, train: Dataset):
    """Grid search over rank, local dimension and threshold.

    One MAP fit per (rank, local_dim, fold) is shared by every threshold.
    Returns ``(best_config, cells)``; failing cells are recorded, not raised.
    """
    ranks, dims, thresholds = _grid(cfg)
    folds = kfold_indices(train.N, cfg.folds, cfg.seed)
    cells = []
    for R, I in itertools.product(ranks, dims):
        sub = cfg.replace(rank=R, local_dim=I)
        per_t = {t: [] for t in thresholds}
        errors = {}
        for j, (tr_idx, va_idx) in enumerate(folds):
            tr, va = train.subset(tr_idx), train.subset(va_idx)
            try:
                fit = fit_point(tr.X, tr.y, sub.replace(seed=cfg.seed + j))
                base = laplace(fit, sub.variant, thresholds[0], sub.threshold_relative)
            except LatnkmError as exc:
                for t in thresholds:
                    errors[t] = f"{type(exc).__name__}: {exc}"
                continue
            lam_max = base.diagnostics["lambda_max"]
            for t in thresholds:
                if t in errors:
                    continue
                try:
                    post = base.rethreshold(t * lam_max if sub.threshold_relative else t)
                    dist = predict(post, va.X, sub.mode, sub.samples, cfg.seed + j)
                    per_t[t].append(nll(dist, va.y))
                except LatnkmError as exc:
                    errors[t] = f"{type(exc).__name__}: {exc}"
        for t in thresholds:
            if t in errors:
                cells.append(CvCell(R, I, t, None, per_t[t], errors[t]))
            else:
                cells.append(CvCell(R, I, t, float(np.mean(per_t[t])), per_t[t]))
    good = [c for c in cells if c.ok]
    if not good:
        return None, cells
    best = min(good, key=lambda c: (c.nll, c.rank, c.local_dim, -c.threshold))
    return cfg.replace(rank=best.rank, local_dim=best.local_dim, threshold=best.threshold), cells


@dataclass
class SweepRow:
    variant: str
    threshold: float
    t_hat: float | None
    report: MetricReport | None
    note: str = ""


def sweep_hessian(cfg: ExperimentConfig, train: Dataset, test: Dataset, variants=tuple(HessianVariant), cap=DENSE_HESSIAN_CAP):
    """Score every Hessian variant and threshold around one shared MAP fit."""
    fit = fit_point(train.X, train.y, cfg)
    n_params = fit.model.n_params
    rows = []
    for variant in variants:
        variant = HessianVariant.parse(variant)
        if variant in (HessianVariant.FULL, HessianVariant.GGN) and n_params > cap:
            for t in cfg.threshold_grid or [cfg.threshold]:
                rows.append(SweepRow(variant.value, t, None, None, f"skipped: {n_params} parameters exceed dense cap {cap}"))
            continue
        base = None
        for t in cfg.threshold_grid or [cfg.threshold]:
            try:
                if base is None:
                    base = laplace(fit, variant, t, cfg.threshold_relative)
                lam_max = base.diagnostics["lambda_max"]
                post = base.rethreshold(t * lam_max if cfg.threshold_relative else t)
                rep = evaluate_posterior(post, test, cfg, cfg.seed)
                rows.append(SweepRow(variant.value, t, post.t_hat, rep))
            except LatnkmError as exc:
                rows.append(SweepRow(variant.value, t, None, None, f"failed: {type(exc).__name__}: {exc}"))
    return rows


# -- text rendering ---------------------------------------------------------


def _fmt(x):
    return "n/a" if x is None else f"{x:.4f}"


def format_summary(summary: EvalSummary, title="") -> str:
    lines = [title] if title else []
    lines.append("seed    " + "  ".join(f"{k:>10}" for k in METRIC_KEYS))
    for r in summary.rows:
        s = r.report.scalars()
        lines.append(f"{r.seed:<6}  " + "  ".join(f"{s[k]:>10.4f}" for k in METRIC_KEYS))
    lines.append("mean    " + "  ".join(f"{summary.mean[k]:>10.4f}" for k in METRIC_KEYS))
    lines.append("std     " + "  ".join(f"{summary.std[k]:>10.4f}" for k in METRIC_KEYS))
    lines.append("summary " + "  ".join(f"{k}={summary.mean[k]:.3f}±{summary.std[k]:.3f}" for k in METRIC_KEYS))
    return "\n".join(lines) + "\n"


def format_cv(cells, best: ExperimentConfig | None, k: int) -> str:
    lines = [CV_NOTE.format(k=k), f"{'R':>3} {'I':>3} {'threshold':>10} {'val_nll':>10}  note"]
    for c in cells:
        lines.append(f"{c.rank:>3} {c.local_dim:>3} {c.threshold:>10.3g} {_fmt(c.nll):>10}  {c.error or ''}")
    if best is None:
        lines.append("no feasible cell")
    else:
        lines.append(f"best: R={best.rank} I={best.local_dim} threshold={best.threshold:g}")
    return "\n".join(lines) + "\n"


def format_sweep(rows) -> str:
    lines = [f"{'variant':<7} {'threshold':>10} {'t_hat':>11} {'nll':>9} {'rmse':>9} {'rce':>7}  note"]
    for r in rows:
        if r.report is None:
            lines.append(f"{r.variant:<7} {r.threshold:>10.3g} {'-':>11} {'-':>9} {'-':>9} {'-':>7}  {r.note}")
        else:
            lines.append(
                f"{r.variant:<7} {r.threshold:>10.3g} {r.t_hat:>11.4g} {r.report.nll:>9.4f} {r.report.rmse:>9.4f} {r.report.rce:>7.4f}  {r.note}"
            )
    return "\n".join(lines) + "\n"

