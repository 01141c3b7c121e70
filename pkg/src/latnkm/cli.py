"""Command-line experiment runner.

Subcommands: ``fit``, ``eval``, ``cv``, ``sweep-hessian``, ``synth``. Settings
come from an optional JSON config (``--config``) overridden by flags. All
outputs go to the ``--out`` directory.

Exit status: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import artifact
from .config import SYNTHETIC_CUBIC, ExperimentConfig
from .cpd import FEATURE_KINDS
from .data import gen_cubic
from .errors import ConfigError, LatnkmError
from .experiment import (
    CV_NOTE,
    cross_validate,
    evaluate_artifact,
    fit_posterior,
    format_cv,
    format_summary,
    format_sweep,
    load_split,
    run_protocol,
    sweep_hessian,
)

log = logging.getLogger("latnkm")

DEFAULT_OUT = "latnkm-out"

# flag dest -> config field
_FIELDS = {
    "dataset": "dataset",
    "target": "target_column",
    "rank": "rank",
    "local_dim": "local_dim",
    "feature_map": "feature_map",
    "hessian": "hessian",
    "threshold": "threshold",
    "threshold_relative": "threshold_relative",
    "mode": "mode",
    "samples": "samples",
    "epochs": "epochs",
    "vi_rounds": "vi_rounds",
    "beta": "beta",
    "gamma": "gamma",
    "train_frac": "train_frac",
    "repeats": "repeats",
    "seed": "seed",
    "folds": "folds",
    "rank_grid": "rank_grid",
    "local_dim_grid": "local_dim_grid",
    "threshold_grid": "threshold_grid",
    "raw_scale": "raw_scale",
    "drop_constant": "drop_constant",
    "out": "out",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser):
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON experiment config; flags override its values")
    p.add_argument("--dataset", default=S, help=f"CSV path or {SYNTHETIC_CUBIC!r}")
    p.add_argument("--target", default=S, help="target column name (default: last column)")
    p.add_argument("--rank", type=int, default=S)
    p.add_argument("--local-dim", type=int, default=S)
    p.add_argument("--feature-map", choices=FEATURE_KINDS, default=S)
    p.add_argument("--hessian", choices=["full", "ggn", "block", "diag", "last"], default=S)
    p.add_argument("--threshold", type=float, default=S)
    p.add_argument("--threshold-relative", action=argparse.BooleanOptionalAction, default=S,
                   help="interpret thresholds as multiples of the largest Hessian eigenvalue")
    p.add_argument("--mode", choices=["la", "lla"], default=S)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--epochs", type=int, default=S)
    p.add_argument("--vi-rounds", type=int, default=S)
    p.add_argument("--beta", type=float, default=S, help="fix the noise precision")
    p.add_argument("--gamma", type=float, default=S, help="fix the weight precision")
    p.add_argument("--train-frac", type=float, default=S)
    p.add_argument("--repeats", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--folds", type=int, default=S)
    p.add_argument("--rank-grid", type=_int_list, default=S)
    p.add_argument("--local-dim-grid", type=_int_list, default=S)
    p.add_argument("--threshold-grid", type=_float_list, default=S)
    p.add_argument("--raw-scale", action=argparse.BooleanOptionalAction, default=S)
    p.add_argument("--drop-constant", action=argparse.BooleanOptionalAction, default=S)
    p.add_argument("--out", default=S, help=f"output directory (default {DEFAULT_OUT})")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latnkm", description="Laplace-approximate Bayesian CPD kernel machines")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("fit", help="train and write a posterior artifact")
    _common(p)
    p = sub.add_parser("eval", help="score a protocol run or a stored artifact")
    _common(p)
    p.add_argument("--model", help="posterior artifact to evaluate instead of refitting")
    p = sub.add_parser("cv", help="cross-validate rank, local dimension and threshold")
    _common(p)
    p = sub.add_parser("sweep-hessian", help="compare all Hessian variants over the threshold grid")
    _common(p)
    p = sub.add_parser("synth", help="write the synthetic cubic train/test data as CSV")
    _common(p)
    return parser


def resolve_config(args, base: ExperimentConfig | None = None) -> ExperimentConfig:
    data = {} if base is None else base.to_dict()
    if getattr(args, "config", None):
        data.update(ExperimentConfig.load(args.config).to_dict())
    for dest, name in _FIELDS.items():
        if hasattr(args, dest):
            data[name] = getattr(args, dest)
    return ExperimentConfig.from_dict(data)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def cmd_fit(cfg: ExperimentConfig) -> Path:
    train, _ = load_split(cfg, cfg.seed)
    post = fit_posterior(cfg, train)
    path = artifact.save(_out_dir(cfg) / "model.json", post, cfg, train.standardizer)
    log.info("posterior (%s, R_hat=%d, t_hat=%.4g) written to %s", post.variant.value, post.rank, post.t_hat, path)
    return path


def cmd_eval(cfg: ExperimentConfig, model_path=None):
    if model_path is None:
        summary = run_protocol(cfg)
        title = f"protocol: dataset={cfg.dataset} hessian={cfg.hessian} mode={cfg.mode} repeats={cfg.repeats}"
    else:
        post, _, _ = artifact.load(model_path)
        _, test = load_split(cfg, cfg.seed)
        summary = evaluate_artifact(post, cfg, test)
        title = f"artifact: {model_path} dataset={cfg.dataset} mode={cfg.mode} repeats={cfg.repeats}"
    out = _out_dir(cfg)
    payload = {"config": cfg.to_dict(), **summary.to_dict()}
    _write(out, "metrics.json", artifact.dumps(payload))
    text = format_summary(summary, title)
    _write(out, "metrics.txt", text)
    return summary, text


def cmd_cv(cfg: ExperimentConfig):
    train, _ = load_split(cfg, cfg.seed)
    best, cells = cross_validate(cfg, train)
    out = _out_dir(cfg)
    payload = {
        "protocol": CV_NOTE.format(k=cfg.folds),
        "config": cfg.to_dict(),
        "best": None if best is None else {"rank": best.rank, "local_dim": best.local_dim, "threshold": best.threshold},
        "cells": [
            {"rank": c.rank, "local_dim": c.local_dim, "threshold": c.threshold, "nll": c.nll, "fold_nll": c.fold_nll, "error": c.error}
            for c in cells
        ],
    }
    _write(out, "cv_grid.json", artifact.dumps(payload))
    text = format_cv(cells, best, cfg.folds)
    _write(out, "cv_grid.txt", text)
    if best is not None:
        _write(out, "best_config.json", artifact.dumps(best.to_dict()))
    return best, cells, text


def cmd_sweep_hessian(cfg: ExperimentConfig):
    train, test = load_split(cfg, cfg.seed)
    rows = sweep_hessian(cfg, train, test)
    out = _out_dir(cfg)
    payload = {
        "config": cfg.to_dict(),
        "rows": [
            {"variant": r.variant, "threshold": r.threshold, "t_hat": r.t_hat, "note": r.note,
             **({} if r.report is None else r.report.scalars())}
            for r in rows
        ],
    }
    _write(out, "hessian_sweep.json", artifact.dumps(payload))
    text = format_sweep(rows)
    _write(out, "hessian_sweep.txt", text)
    return rows, text


def cmd_synth(cfg: ExperimentConfig):
    out = _out_dir(cfg)
    train, test = gen_cubic(cfg.seed)
    paths = []
    for name, ds in (("cubic_train.csv", train), ("cubic_test.csv", test)):
        rows = np.column_stack([ds.X[:, 0], ds.y])
        lines = ["x,y"] + [f"{x!r},{y!r}" for x, y in rows.tolist()]
        paths.append(_write(out, name, "\n".join(lines) + "\n"))
    return paths


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        base = None
        model_path = getattr(args, "model", None)
        if model_path is not None and not args.config:
            _, base, _ = artifact.load(model_path)
        cfg = resolve_config(args, base)
        if args.command == "fit":
            print(cmd_fit(cfg))
        elif args.command == "eval":
            print(cmd_eval(cfg, model_path)[1], end="")
        elif args.command == "cv":
            print(cmd_cv(cfg)[2], end="")
        elif args.command == "sweep-hessian":
            print(cmd_sweep_hessian(cfg)[1], end="")
        elif args.command == "synth":
            for p in cmd_synth(cfg):
                print(p)
    except LatnkmError as exc:
        print(f"latnkm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # remaining ValueErrors are argument/config problems
        print(f"latnkm: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
