"""
Dataset ingestion (LIBSVM and CSV) and even partitioning across agents.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IndexOutOfRange, MalformedLine, MalformedRow, MissingColumn
from .objective import QuadraticCost

__all__ = [
    "Dataset",
    "parse_libsvm",
    "write_libsvm",
    "parse_csv_dataset",
    "write_csv_dataset",
    "normalize",
    "partition_sizes",
    "partition_even",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)
    feature_names: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"features {X.shape} and labels {y.shape} disagree")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"f{k}" for k in range(X.shape[1])))

    @property
    def d(self):
        return self.features.shape[1]

    def __len__(self):
        return self.features.shape[0]

    @property
    def rows(self):
        return list(zip(self.features, self.labels))


def _finite(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {text!r}")
    return v


def parse_libsvm(path, d):
    """Read ``label idx:val ...`` lines with 1-based indices; absent entries are zero."""
    feats, labels = [], []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = _finite(tokens[0])
            except ValueError as exc:
                raise MalformedLine(line_no, str(exc)) from None
            row = np.zeros(d)
            for tok in tokens[1:]:
                idx_text, sep, val_text = tok.partition(":")
                if not sep:
                    raise MalformedLine(line_no, f"token {tok!r} is not idx:val")
                try:
                    idx = int(idx_text)
                    val = _finite(val_text)
                except ValueError as exc:
                    raise MalformedLine(line_no, str(exc)) from None
                if idx < 1 or idx > d:
                    raise IndexOutOfRange(line_no, idx)
                row[idx - 1] = val
            feats.append(row)
            labels.append(label)
    X = np.array(feats).reshape(-1, d)
    return Dataset(X, np.array(labels), {"path": str(path), "format": "libsvm"})


def write_libsvm(ds, path):
    with open(path, "w") as fh:
        for x, y in zip(ds.features, ds.labels):
            parts = [repr(float(y))]
            parts += [f"{k + 1}:{float(v)!r}" for k, v in enumerate(x) if v != 0.0]
            fh.write(" ".join(parts) + "\n")


def parse_csv_dataset(path, label_column=None):
    """Read a headed CSV; every non-label column, in header order, is a feature.

    `label_column` defaults to the last column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedRow(1, "missing header") from None
        if label_column is None:
            label_column = header[-1]
        if label_column not in header:
            raise MissingColumn(label_column)
        li = header.index(label_column)
        names = tuple(h for k, h in enumerate(header) if k != li)
        feats, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MalformedRow(line_no, f"expected {len(header)} cells, got {len(row)}")
            try:
                vals = [_finite(c) for c in row]
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from None
            labels.append(vals[li])
            feats.append(vals[:li] + vals[li + 1:])
    X = np.array(feats, dtype=float).reshape(-1, len(names))
    return Dataset(X, np.array(labels), {"path": str(path), "format": "csv", "label": label_column}, names)


def write_csv_dataset(ds, path, label_column="label"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.feature_names) + [label_column])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def normalize(ds):
    """Z-score every feature column (constant columns are only centered)."""
    mean = ds.features.mean(axis=0)
    std = ds.features.std(axis=0)
    std[std == 0] = 1.0
    prov = dict(ds.provenance, normalized=True)
    return Dataset((ds.features - mean) / std, ds.labels, prov, ds.feature_names)


def partition_sizes(rows, n):
    """Contiguous block sizes: the first ``rows % n`` agents get one extra row."""
    if n < 1:
        raise ValueError("need at least one agent")
    if n > rows:
        raise ValueError(f"cannot split {rows} rows over {n} agents")
    q, r = divmod(rows, n)
    return [q + 1 if i < r else q for i in range(n)]


def partition_even(ds, n, shuffle_seed=None, ridge=0.0):
    """Split rows into `n` contiguous shards and build each agent's least-squares cost."""
    order = np.arange(len(ds))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(ds))
    costs, start = [], 0
    for size in partition_sizes(len(ds), n):
        idx = order[start:start + size]
        costs.append(QuadraticCost(ds.features[idx], ds.labels[idx], ridge))
        start += size
    return costs
