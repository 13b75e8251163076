"""Vietoris-Rips filtrations on weighted graphs and exact Betti curves.

The graph's edge weights are the only finite dissimilarities, so the Rips
complex at scale ``eps`` is the clique complex of the edges with weight
``<= eps``. Betti curves are read off a single Z/2 persistence reduction;
they change only at edge weights, so no scale grid is involved.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .ingest import DailyGraph


@dataclass(frozen=True)
class FiltrationSpec:
    max_homology_dim: int = 2
    scale_cap: float = 1.0

    def __post_init__(self):
        if not 0 <= self.max_homology_dim <= 2:
            raise ValueError("max_homology_dim must be in 0..2")
        if not self.scale_cap > 0:
            raise ValueError("scale_cap must be positive")


@dataclass(frozen=True)
class BettiCurve:
    """Right-continuous step function on ``[0, scale_cap]``.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i + 1])``; the last
    value holds up to and including ``scale_cap``. Stored in canonical form:
    ``breakpoints[0] == 0`` and consecutive values differ.
    """

    dim: int
    breakpoints: tuple[float, ...]
    values: tuple[int, ...]
    scale_cap: float = 1.0
    date: object = None

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values) or not self.breakpoints:
            raise ValueError("breakpoints and values must be non-empty and equal length")
        if self.breakpoints[0] != 0:
            raise ValueError("first breakpoint must be 0")

    def __call__(self, eps: float) -> int:
        if eps < 0 or eps > self.scale_cap:
            raise ValueError(f"scale {eps} outside [0, {self.scale_cap}]")
        return self.values[bisect.bisect_right(self.breakpoints, eps) - 1]

    def evaluate(self, eps) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breakpoints), np.asarray(eps, dtype=float), side="right") - 1
        return np.asarray(self.values, dtype=np.int64)[idx]

    def same_function(self, other: "BettiCurve") -> bool:
        return (self.dim, self.breakpoints, self.values, self.scale_cap) == (
            other.dim, other.breakpoints, other.values, other.scale_cap)

    @classmethod
    def constant(cls, dim: int, value: int, scale_cap: float = 1.0, date=None) -> "BettiCurve":
        return cls(dim, (0.0,), (int(value),), scale_cap, date)

    @classmethod
    def from_steps(cls, dim: int, breakpoints: Sequence[float], values: Sequence[int],
                   scale_cap: float = 1.0, date=None) -> "BettiCurve":
        """Canonicalize: merge repeated breakpoints (last wins) and equal runs."""
        bps, vals = [], []
        for b, v in zip(breakpoints, values):
            b = float(b)
            if bps and b == bps[-1]:
                vals[-1] = int(v)
            else:
                bps.append(b)
                vals.append(int(v))
        cb, cv = [], []
        for b, v in zip(bps, vals):
            if cv and cv[-1] == v:
                continue
            cb.append(b)
            cv.append(v)
        return cls(dim, tuple(cb), tuple(cv), scale_cap, date)


@dataclass
class FilteredComplex:
    """Simplices in filtration order with their boundary matrix in CSR form."""

    labels: tuple
    dims: np.ndarray          # (N,) int32
    values: np.ndarray        # (N,) float64
    indptr: np.ndarray        # (N + 1,) int64
    indices: np.ndarray       # face rows, ascending within a column
    max_homology_dim: int
    by_dim: list              # per dimension, (count, d + 1) vertex-index rows
    local: np.ndarray         # row of each simplex within by_dim[dim]

    def __len__(self) -> int:
        return len(self.dims)

    @cached_property
    def vertices(self) -> list[tuple[int, ...]]:
        return [tuple(self.by_dim[d][i].tolist()) for d, i in zip(self.dims, self.local)]

    @cached_property
    def simplices(self) -> list[tuple[tuple, float]]:
        """``(vertex labels, filtration value)`` pairs in filtration order."""
        return [(tuple(self.labels[i] for i in s), float(f)) for s, f in zip(self.vertices, self.values)]


def _graph_arrays(g: DailyGraph):
    labels = tuple(sorted(g.nodes))
    index = {a: i for i, a in enumerate(labels)}
    m = len(g.edges)
    eu = np.empty(m, dtype=np.int64)
    ev = np.empty(m, dtype=np.int64)
    ew = np.empty(m, dtype=np.float64)
    for i, ((a, b), e) in enumerate(g.edges.items()):
        u, v = index[a], index[b]
        eu[i], ev[i] = min(u, v), max(u, v)
        ew[i] = e.weight
    order = np.lexsort((ev, eu))
    return labels, eu[order], ev[order], ew[order]


def _lex_key(rows: np.ndarray, n: int) -> np.ndarray:
    key = np.zeros(rows.shape[0], dtype=np.int64)
    for c in range(rows.shape[1]):
        key = key * n + rows[:, c]
    return key


def rips_complex(labels, eu, ev, ew, max_homology_dim: int = 2, backend: str | None = None) -> FilteredComplex:
    """Clique filtration up to dimension ``max_homology_dim + 1``.

    ``eu < ev`` index the finite-weight edges (lexicographically sorted), ``ew``
    their weights. Filtration value of a simplex is its largest edge weight;
    ties are ordered by dimension, then vertex list.
    """
    kern = kernels.get(backend)
    n = len(labels)
    top = max_homology_dim + 1
    by_dim = [np.arange(n, dtype=np.int64).reshape(-1, 1)]
    vals = [np.zeros(n)]
    if top >= 1:
        by_dim.append(np.stack([eu, ev], axis=1).reshape(-1, 2))
        vals.append(np.asarray(ew, dtype=np.float64))
    if top >= 2 and len(eu):
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, eu + 1, 1)
        indptr = np.cumsum(indptr)
        cliques = kern.expand_cliques(n, indptr, np.ascontiguousarray(ev), top + 1)
        edge_key = eu * n + ev
        for rows in cliques:
            if rows.shape[1] > top + 1:
                break
            w = np.zeros(rows.shape[0])
            for a in range(rows.shape[1]):
                for b in range(a + 1, rows.shape[1]):
                    pos = np.searchsorted(edge_key, rows[:, a] * n + rows[:, b])
                    w = np.maximum(w, ew[pos])
            by_dim.append(rows)
            vals.append(w)

    dims = np.concatenate([np.full(len(v), d, dtype=np.int32) for d, v in enumerate(vals)])
    values = np.concatenate(vals)
    local = np.concatenate([np.arange(len(v)) for v in vals])
    order = np.lexsort((local, dims, values))
    offsets = np.cumsum([0] + [len(v) for v in vals])
    global_of = np.empty(len(order), dtype=np.int64)
    global_of[order] = np.arange(len(order))

    face_rows = [np.zeros((n, 0), dtype=np.int64)]
    for d in range(1, len(by_dim)):
        rows = by_dim[d]
        prev_key = _lex_key(by_dim[d - 1], n)
        faces = np.empty((rows.shape[0], d + 1), dtype=np.int64)
        for j in range(d + 1):
            sub = np.delete(rows, j, axis=1)
            faces[:, j] = global_of[offsets[d - 1] + np.searchsorted(prev_key, _lex_key(sub, n))]
        faces.sort(axis=1)
        face_rows.append(faces)

    sdims = dims[order]
    slocal = local[order]
    counts = np.where(sdims > 0, sdims.astype(np.int64) + 1, 0)
    indptr = np.zeros(len(order) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(counts)
    indices = np.empty(indptr[-1], dtype=np.int64)
    for d in range(1, len(by_dim)):
        pos = np.flatnonzero(sdims == d)
        slots = indptr[pos][:, None] + np.arange(d + 1)
        indices[slots.ravel()] = face_rows[d][slocal[pos]].ravel()
    return FilteredComplex(labels, sdims, values[order], indptr, indices, max_homology_dim,
                           by_dim, slocal)


def build_filtration(g: DailyGraph, spec: FiltrationSpec = FiltrationSpec(),
                     backend: str | None = None) -> FilteredComplex:
    labels, eu, ev, ew = _graph_arrays(g)
    if len(ew) and ew.max() > spec.scale_cap:
        raise ValueError(f"edge weight {ew.max()} exceeds scale cap {spec.scale_cap}")
    return rips_complex(labels, eu, ev, ew, spec.max_homology_dim, backend)


def barcode(cx: FilteredComplex, backend: str | None = None) -> list[tuple[int, float, float]]:
    """Persistence intervals ``(dim, birth, death)`` for dims ``0..max_homology_dim``.

    Essential classes die at ``inf``; zero-length intervals are dropped.
    """
    kern = kernels.get(backend)
    low = kern.reduce_boundary(cx.indptr, cx.indices, np.ascontiguousarray(cx.dims, dtype=np.int32))
    paired = np.zeros(len(cx), dtype=bool)
    out = []
    for j in np.flatnonzero(low >= 0):
        i = low[j]
        paired[i] = paired[j] = True
        b, d = cx.values[i], cx.values[j]
        if d > b:
            out.append((int(cx.dims[i]), float(b), float(d)))
    for i in np.flatnonzero(~paired):
        if cx.dims[i] <= cx.max_homology_dim:
            out.append((int(cx.dims[i]), float(cx.values[i]), float("inf")))
    return out


def curves_from_barcode(bars, max_homology_dim: int, scale_cap: float = 1.0, date=None) -> list[BettiCurve]:
    curves = []
    for p in range(max_homology_dim + 1):
        births = np.sort([b for d, b, _ in bars if d == p])
        deaths = np.sort([x for d, _, x in bars if d == p and x <= scale_cap])
        events = np.unique(np.concatenate([[0.0], births, deaths]))
        vals = (np.searchsorted(births, events, side="right")
                - np.searchsorted(deaths, events, side="right"))
        curves.append(BettiCurve.from_steps(p, events, vals, scale_cap, date))
    return curves


def betti_curves(cx: FilteredComplex, spec: FiltrationSpec = FiltrationSpec(), date=None,
                 backend: str | None = None) -> list[BettiCurve]:
    return curves_from_barcode(barcode(cx, backend), min(spec.max_homology_dim, cx.max_homology_dim),
                               spec.scale_cap, date)


def graph_betti_curves(g: DailyGraph, spec: FiltrationSpec = FiltrationSpec(),
                       backend: str | None = None) -> list[BettiCurve]:
    """Betti curves ``B_0..B_d`` of one daily graph."""
    return betti_curves(build_filtration(g, spec, backend), spec, g.date, backend)
