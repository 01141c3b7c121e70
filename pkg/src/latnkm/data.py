"""Dataset loading, train/test splitting with standardisation, and the synthetic cubic task."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidData


@dataclass
class Standardizer:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    @classmethod
    def fit(cls, X, y) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        x_std = X.std(axis=0)
        bad = np.flatnonzero(~(x_std > 0))
        if bad.size:
            raise InvalidData(f"constant input column(s) {bad.tolist()} cannot be standardised")
        y_std = float(y.std())
        if not y_std > 0:
            raise InvalidData("constant target cannot be standardised")
        return cls(X.mean(axis=0), x_std, float(y.mean()), y_std)

    def transform_X(self, X):
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_std

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def inverse_X(self, Xs):
        return np.asarray(Xs) * self.x_std + self.x_mean

    def inverse_y(self, ys):
        return np.asarray(ys) * self.y_std + self.y_mean

    def to_dict(self) -> dict:
        return {"x_mean": self.x_mean.tolist(), "x_std": self.x_std.tolist(), "y_mean": self.y_mean, "y_std": self.y_std}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["x_mean"], float), np.asarray(d["x_std"], float), float(d["y_mean"]), float(d["y_std"]))


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = ""
    columns: list[str] | None = None
    standardizer: Standardizer | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.size:
            raise InvalidData(f"X has {self.X.shape[0]} rows but y has {self.y.size} entries")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise InvalidData("dataset contains NaN or Inf")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def D(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return replace(self, X=self.X[idx], y=self.y[idx])


def _parse_float(text, row, column):
    try:
        val = float(text)
    except ValueError:
        raise FormatError(f"non-numeric cell {text!r}", row=row, column=column) from None
    if not math.isfinite(val):
        raise FormatError(f"non-finite cell {text!r}", row=row, column=column)
    return val


def load_csv(path, target_column=None, drop_constant=False) -> Dataset:
    """Read a headed, comma-separated numeric file. The target defaults to the last column.

    Row numbers in errors are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path} is empty") from None
        if len(set(header)) != len(header) or any(not h for h in header):
            raise FormatError("header must name every column uniquely", row=1)
        target = header[-1] if target_column is None else target_column
        if target not in header:
            raise FormatError(f"target column {target!r} not found; columns are {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise FormatError(f"expected {len(header)} fields, found {len(rec)}", row=lineno)
            rows.append([_parse_float(c.strip(), lineno, header[j]) for j, c in enumerate(rec)])
    if not rows:
        raise FormatError(f"{path} has no data rows")
    data = np.array(rows)
    t = header.index(target)
    features = [h for h in header if h != target]
    X = np.delete(data, t, axis=1)
    const = np.flatnonzero(X.std(axis=0) == 0) if X.shape[0] > 1 else np.array([], dtype=int)
    if const.size:
        if not drop_constant:
            names = [features[j] for j in const]
            raise InvalidData(f"constant feature column(s) {names}; pass drop_constant to remove them")
        X = np.delete(X, const, axis=1)
        features = [f for j, f in enumerate(features) if j not in set(const.tolist())]
    if X.shape[1] == 0:
        raise InvalidData("no feature columns remain")
    return Dataset(X, data[:, t], name=path.stem, columns=features)


def split(ds: Dataset, train_frac=0.9, seed=0, standardize=True):
    """Seeded random split; the standardiser is fitted on the training part only."""
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    n_train = int(round(train_frac * ds.N))
    if n_train < 1 or n_train >= ds.N:
        raise InvalidData(f"split of {ds.N} samples at {train_frac} leaves one side empty")
    perm = np.random.default_rng(seed).permutation(ds.N)
    train, test = ds.subset(perm[:n_train]), ds.subset(perm[n_train:])
    if not standardize:
        return train, test
    return standardize_pair(train, test)


def standardize_pair(train: Dataset, test: Dataset):
    st = Standardizer.fit(train.X, train.y)
    return (
        replace(train, X=st.transform_X(train.X), y=st.transform_y(train.y), standardizer=st),
        replace(test, X=st.transform_X(test.X), y=st.transform_y(test.y), standardizer=st),
    )


def kfold_indices(n, k, seed):
    """``k`` (train_idx, val_idx) pairs from one seeded permutation."""
    if not 2 <= k <= n:
        raise InvalidData(f"cannot make {k} folds from {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    return [(np.concatenate(folds[:j] + folds[j + 1:]), folds[j]) for j in range(k)]


CUBIC_NOISE_STD = 3.0


def gen_cubic(seed=0, noise=True, n_train=20, n_test=100):
    """``y = x**3 + eps`` with ``eps ~ N(0, 3**2)``: train x ~ U[-4, 4], test x ~ U[-5, 5]. Not standardised."""
    rng = np.random.default_rng(seed)
    x_tr = rng.uniform(-4, 4, n_train)
    x_te = rng.uniform(-5, 5, n_test)
    e_tr = rng.normal(0, CUBIC_NOISE_STD, n_train)
    e_te = rng.normal(0, CUBIC_NOISE_STD, n_test)
    if not noise:
        e_tr = np.zeros(n_train)
        e_te = np.zeros(n_test)
    return (
        Dataset(x_tr[:, None], x_tr**3 + e_tr, name="synthetic-cubic", columns=["x"]),
        Dataset(x_te[:, None], x_te**3 + e_te, name="synthetic-cubic", columns=["x"]),
    )
