"""Random forest anomaly classifier, chronological split and evaluation.

Trees are grown on bootstrap samples with Gini splits over ``mtry`` randomly
chosen features per node. Every tree draws from its own PRNG stream spawned
from the model seed, so serial and parallel training give the same forest.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from . import kernels
from .features import FeatureMatrix

log = logging.getLogger(__name__)

MODEL_FEATURES = {
    "M1": ("pn", "ne", "nv", "gc"),
    "M2": ("pn", "ne", "nv", "gc", "rd0"),
    "M3": ("pn", "ne", "nv", "gc", "rd0", "rd1"),
    "M4": ("pn", "ne", "nv", "gc", "rd0", "rd1", "rd2"),
}


@dataclass(frozen=True)
class ModelSpec:
    id: str = "M4"
    trees: int = 500
    mtry: str | int = "auto"
    seed: int = 0
    min_leaf: int = 1
    balanced: bool = False
    n_jobs: int = 1
    backend: str | None = None

    def __post_init__(self):
        if self.id not in MODEL_FEATURES:
            raise ValueError(f"unknown model {self.id!r}")
        if self.trees < 1 or self.min_leaf < 1:
            raise ValueError("trees and min_leaf must be >= 1")

    @property
    def feature_set(self) -> tuple[str, ...]:
        return MODEL_FEATURES[self.id]

    def n_split_features(self) -> int:
        """``auto``/``sqrt``: floor(sqrt(p)); ``all``: p (bagging); or an explicit count."""
        p = len(self.feature_set)
        if self.mtry in ("auto", "sqrt"):
            return max(1, math.isqrt(p))
        if self.mtry == "all":
            return p
        m = int(self.mtry)
        if not 1 <= m <= p:
            raise ValueError(f"mtry {m} outside 1..{p}")
        return m


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray   # -1 for internal nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.leaf_class[node] < 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.leaf_class[node] < 0
        return self.leaf_class[node].astype(bool)


def _leaf(y: np.ndarray) -> int:
    pos = int(y.sum())
    return 1 if pos * 2 > len(y) else 0


def grow_tree(X: np.ndarray, y: np.ndarray, mtry: int, min_leaf: int, rng: np.random.Generator,
              backend: str | None = None) -> Tree:
    kern = kernels.get(backend)
    y8 = y.astype(np.int8)
    feature, threshold, left, right, leaf = [], [], [], [], []

    def new_node():
        for lst, v in ((feature, 0), (threshold, 0.0), (left, -1), (right, -1), (leaf, -1)):
            lst.append(v)
        return len(feature) - 1

    stack = [(new_node(), np.arange(len(y)))]
    p = X.shape[1]
    while stack:
        node, idx = stack.pop()
        ys = y8[idx]
        n = len(idx)
        pos = int(ys.sum())
        if pos == 0 or pos == n or n < 2 * min_leaf:
            leaf[node] = _leaf(ys)
            continue
        parent = (pos * pos + (n - pos) * (n - pos)) / n
        best = None
        for f in rng.choice(p, size=mtry, replace=False):
            found, score, thr = kern.best_split(np.ascontiguousarray(X[idx, f]), ys, min_leaf)
            if found and (best is None or score > best[0]):
                best = (score, int(f), thr)
        if best is None or best[0] <= parent * (1 + 1e-12):
            leaf[node] = _leaf(ys)
            continue
        _, f, thr = best
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        stack.append((rnode, idx[~mask]))
        stack.append((lnode, idx[mask]))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(leaf, dtype=np.int8))


def _bootstrap(y: np.ndarray, rng: np.random.Generator, balanced: bool) -> np.ndarray:
    n = len(y)
    if balanced:
        pos, neg = np.flatnonzero(y), np.flatnonzero(~y)
        if len(pos) and len(neg):
            half = n // 2
            return np.concatenate([rng.choice(pos, half), rng.choice(neg, n - half)])
    return rng.integers(0, n, size=n)


def _fit_one(X, y, seed_seq, mtry, min_leaf, balanced, backend):
    rng = np.random.default_rng(seed_seq)
    sample = _bootstrap(y, rng, balanced)
    return sample, grow_tree(X[sample], y[sample], mtry, min_leaf, rng, backend)


@dataclass
class ForestModel:
    spec: ModelSpec
    columns: tuple[str, ...]
    trees: list[Tree]
    bootstraps: list[np.ndarray] = field(repr=False)
    train_dates: list = field(repr=False, default_factory=list)

    def votes(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(len(X))
        for t in self.trees:
            total += t.predict(X)
        return total / len(self.trees)


def split(matrix: FeatureMatrix, train_frac: float = 2 / 3) -> tuple[FeatureMatrix, FeatureMatrix]:
    """First ``floor(n * train_frac)`` rows (chronologically) train, the rest test."""
    n = len(matrix)
    if n < 3:
        raise ValueError(f"{matrix.token}: need at least 3 rows to split, got {n}")
    rows = sorted(matrix.rows, key=lambda r: r.date)
    if abs(train_frac - 2 / 3) < 1e-3:
        cut = (2 * n) // 3
    else:
        cut = int(math.floor(n * train_frac))
    cut = min(max(cut, 1), n - 1)
    return matrix.subset(rows[:cut]), matrix.subset(rows[cut:])


def train_forest(train: FeatureMatrix, spec: ModelSpec) -> ForestModel:
    if not len(train):
        raise ValueError("empty training set")
    columns = spec.feature_set
    X = train.X(columns)
    y = train.labels
    mtry = spec.n_split_features()
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.trees)
    if spec.n_jobs == 1:
        fitted = [_fit_one(X, y, s, mtry, spec.min_leaf, spec.balanced, spec.backend) for s in seeds]
    else:
        fitted = Parallel(n_jobs=spec.n_jobs)(
            delayed(_fit_one)(X, y, s, mtry, spec.min_leaf, spec.balanced, spec.backend) for s in seeds)
    return ForestModel(spec, columns, [t for _, t in fitted], [b for b, _ in fitted], train.dates)


def predict(model: ForestModel, rows: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Majority vote and positive vote fraction per row; an exact tie is negative."""
    frac = model.votes(rows.X(model.columns))
    return frac > 0.5, frac


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    positive_days: tuple = ()

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def precision(self) -> float | None:
        d = self.tp + self.fp
        return self.tp / d if d else None

    @property
    def recall(self) -> float | None:
        d = self.tp + self.fn
        return self.tp / d if d else None

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn, "n": self.n}

    def __add__(self, other: "Metrics") -> "Metrics":
        return Metrics(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn,
                       self.positive_days + other.positive_days)


def evaluate(predictions: Sequence[bool], labels: Sequence[bool], days: Sequence | None = None) -> Metrics:
    pred = np.asarray(predictions, dtype=bool)
    lab = np.asarray(labels, dtype=bool)
    if pred.shape != lab.shape:
        raise ValueError("predictions and labels are not aligned")
    if not pred.size:
        raise ValueError("nothing to evaluate")
    positive = ()
    if days is not None:
        positive = tuple(d for d, p in zip(days, pred) if p)
    return Metrics(int((pred & lab).sum()), int((pred & ~lab).sum()), int((~pred & ~lab).sum()),
                   int((~pred & lab).sum()), positive)


def agreement_counts(positives: Mapping[str, Iterable]) -> dict[str, int]:
    """Venn-region sizes: days keyed by the exact set of models that flagged them."""
    owners: dict = {}
    for model in sorted(positives):
        for day in positives[model]:
            owners.setdefault(day, []).append(model)
    counts: dict[str, int] = {}
    for models in owners.values():
        key = "&".join(models)
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


def shared_positives(positives: Mapping[str, Iterable], models: Sequence[str]) -> int:
    """Days flagged by every model in ``models`` (regardless of the others)."""
    sets = [set(positives[m]) for m in models]
    return len(set.intersection(*sets)) if sets else 0


def fit_evaluate(matrix: FeatureMatrix, spec: ModelSpec, train_frac: float = 2 / 3):
    train, test = split(matrix, train_frac)
    model = train_forest(train, spec)
    pred, frac = predict(model, test)
    return model, test, pred, frac, evaluate(pred, test.labels, [(test.token, d) for d in test.dates])


def horizon_scan(matrix_for_horizon: Callable[[int], FeatureMatrix], spec: ModelSpec,
                 horizons: Iterable[int] = range(1, 8), train_frac: float = 2 / 3) -> dict[int, Metrics]:
    out = {}
    for h in horizons:
        out[h] = fit_evaluate(matrix_for_horizon(h), spec, train_frac)[-1]
    return out


def max_reliable_horizon(matrix_for_horizon: Callable[[int], FeatureMatrix], spec: ModelSpec, rho: float,
                         h_max: int = 7, train_frac: float = 2 / 3) -> int | None:
    """Largest ``h`` in ``1..h_max`` whose retrained model reaches test accuracy ``rho``."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    scan = horizon_scan(matrix_for_horizon, spec, range(1, h_max + 1), train_frac)
    return reliable_from_scan(scan, rho)


def reliable_from_scan(scan: Mapping[int, Metrics], rho: float) -> int | None:
    ok = [h for h, m in scan.items() if m.accuracy >= rho]
    return max(ok) if ok else None
