"""Versioned JSON container for fitted posteriors.

Floats are written with ``repr`` precision, so a save/load round trip
reproduces every array bit for bit and identical fits give identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .cpd import CpdModel, FeatureMapSpec
from .data import Standardizer
from .errors import FormatError
from .hessian import HessianMatrix, HessianVariant, TruncatedEig
from .inference import GammaPosterior, LaplacePosterior

SCHEMA = "latnkm.posterior"
VERSION = 1


def _gamma(q):
    return None if q is None else {"a": q.a, "b": q.b}


def _factor(f: TruncatedEig) -> dict:
    d = {"values": f.values.tolist(), "t_hat": f.t_hat, "dim": f.dim, "offset": f.offset}
    if f.axes is not None:
        d["axes"] = f.axes.tolist()
    else:
        d["vectors"] = f.vectors.tolist()
    return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def posterior_to_dict(post: LaplacePosterior, config: ExperimentConfig | None = None, standardizer: Standardizer | None = None) -> dict:
    H = post.hessian
    return {
        "schema": SCHEMA,
        "version": VERSION,
        "config": None if config is None else config.to_dict(),
        "feature_spec": {"local_dim": post.feature_spec.local_dim, "kind": post.feature_spec.kind},
        "cores": [c.tolist() for c in post.mean.cores],
        "variant": post.variant.value,
        "t_hat": post.t_hat,
        "beta": post.beta,
        "gamma": post.gamma,
        "q_beta": _gamma(post.q_beta),
        "q_gamma": _gamma(post.q_gamma),
        "factors": [_factor(f) for f in post.factors],
        "hessian": None
        if H is None
        else {"blocks": [b.tolist() for b in H.blocks], "offset": H.offset, "dim": H.dim},
        "standardizer": None if standardizer is None else standardizer.to_dict(),
        "diagnostics": _jsonable(post.diagnostics),
    }


def posterior_from_dict(d: dict):
    """Returns ``(posterior, config or None, standardizer or None)``."""
    if d.get("schema") != SCHEMA:
        raise FormatError(f"not a posterior artifact (schema {d.get('schema')!r})")
    if d.get("version") != VERSION:
        raise FormatError(f"artifact version {d.get('version')!r} is not supported (expected {VERSION})")
    try:
        spec = FeatureMapSpec(**d["feature_spec"])
        model = CpdModel([np.asarray(c, dtype=float) for c in d["cores"]], spec)
        variant = HessianVariant(d["variant"])
        factors = []
        for f in d["factors"]:
            factors.append(
                TruncatedEig(
                    values=np.asarray(f["values"], dtype=float),
                    t_hat=f["t_hat"],
                    dim=f["dim"],
                    offset=f["offset"],
                    vectors=np.asarray(f["vectors"], dtype=float).reshape(f["dim"], len(f["values"])) if "vectors" in f else None,
                    axes=np.asarray(f["axes"], dtype=int) if "axes" in f else None,
                )
            )
        H = None
        if d.get("hessian") is not None:
            h = d["hessian"]
            H = HessianMatrix(variant, [np.asarray(b, dtype=float) for b in h["blocks"]], d["beta"], d["gamma"], h["offset"], h["dim"])
        qb = None if d["q_beta"] is None else GammaPosterior(**d["q_beta"])
        qg = None if d["q_gamma"] is None else GammaPosterior(**d["q_gamma"])
        post = LaplacePosterior(model, variant, factors, d["t_hat"], d["beta"], d["gamma"], qb, qg, H, d.get("diagnostics") or {})
        config = None if d.get("config") is None else ExperimentConfig.from_dict(d["config"])
        st = None if d.get("standardizer") is None else Standardizer.from_dict(d["standardizer"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed posterior artifact: {exc}") from exc
    return post, config, st


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def save(path, post: LaplacePosterior, config=None, standardizer=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(posterior_to_dict(post, config, standardizer)), encoding="utf-8")
    return path


def load(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read artifact {path}: {exc}") from exc
    return posterior_from_dict(d)
