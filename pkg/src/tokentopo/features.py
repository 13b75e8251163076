"""Price labels, classical graph summaries and the per-day feature matrix."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .depth import betti_pivot, rolling_depth
from .homology import BettiCurve, FiltrationSpec, graph_betti_curves
from .ingest import DailyGraph, PriceSeries, TokenTransaction, daily_graphs

log = logging.getLogger(__name__)

FEATURE_COLUMNS = ("pn", "ne", "nv", "gc", "rd0", "rd1", "rd2")
ONE_DAY = timedelta(days=1)


@dataclass(frozen=True)
class LabelSpec:
    delta: float = 0.25
    horizon: int = 2

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass(frozen=True)
class FeatureConfig:
    k: int | None = 150
    alpha: float = 9.0
    window: int = 7
    max_dim: int = 2
    scale_cap: float = 1.0
    normalization: str = "post-filter"
    label: LabelSpec = field(default_factory=LabelSpec)

    @property
    def filtration(self) -> FiltrationSpec:
        return FiltrationSpec(self.max_dim, self.scale_cap)


def _price_map(prices) -> Mapping[date, float]:
    return prices.as_dict() if isinstance(prices, PriceSeries) else prices


def price_return(prices, t: date) -> float | None:
    """Day-over-day return ``(P_t - P_{t-1}) / P_{t-1}``; None if either price is missing."""
    p = _price_map(prices)
    if t not in p or t - ONE_DAY not in p:
        return None
    prev = p[t - ONE_DAY]
    return (p[t] - prev) / prev


def anomaly_flag(prices, t: date, spec: LabelSpec = LabelSpec()) -> bool | None:
    """True iff some day in ``t+1 .. t+h`` has ``|return| >= delta``.

    None when any of those returns cannot be computed.
    """
    p = _price_map(prices)
    hit = False
    for s in range(1, spec.horizon + 1):
        r = price_return(p, t + s * ONE_DAY)
        if r is None:
            return None
        hit = hit or abs(r) >= spec.delta
    return hit


def normalized_price(prices: PriceSeries, t: date) -> float:
    """Price on ``t`` over the all-time maximum of the series."""
    if not len(prices):
        raise ValueError("empty price series")
    return prices.as_dict()[t] / max(prices.prices)


def graph_summaries(g: DailyGraph) -> tuple[int, int, float]:
    """Edge count, node count and mean local clustering (degree < 2 counts as 0)."""
    nbrs: dict[str, set[str]] = {v: set() for v in g.nodes}
    for u, v in g.edges:
        nbrs[u].add(v)
        nbrs[v].add(u)
    total = 0.0
    for v, nb in nbrs.items():
        k = len(nb)
        if k < 2:
            continue
        links = sum(len(nbrs[a] & nb) for a in nb) // 2
        total += 2.0 * links / (k * (k - 1))
    n = len(g.nodes)
    return len(g.edges), n, (total / n if n else 0.0)


@dataclass(frozen=True)
class FeatureRow:
    token: str
    date: date
    pn: float
    ne: int
    nv: int
    gc: float
    rd0: float | None
    rd1: float | None
    rd2: float | None
    label: bool
    n_tx: int = 0

    def get(self, column: str):
        return getattr(self, column)


@dataclass
class FeatureMatrix:
    token: str
    rows: list[FeatureRow]
    horizon: int = 2
    pivots: dict[int, BettiCurve] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def dates(self) -> list[date]:
        return [r.date for r in self.rows]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=bool)

    def X(self, columns: Sequence[str]) -> np.ndarray:
        out = np.empty((len(self.rows), len(columns)))
        for i, r in enumerate(self.rows):
            for j, c in enumerate(columns):
                v = r.get(c)
                if v is None:
                    raise ValueError(f"{self.token} {r.date}: missing feature {c}")
                out[i, j] = v
        return out

    def subset(self, rows: Iterable[FeatureRow]) -> "FeatureMatrix":
        return FeatureMatrix(self.token, list(rows), self.horizon, self.pivots)


@dataclass(frozen=True)
class DayRecord:
    date: date
    n_tx: int
    ne: int
    nv: int
    gc: float
    curves: tuple[BettiCurve, ...]
    rd: tuple[float | None, ...]


@dataclass
class TokenFeatures:
    """Per-day graph summaries, Betti curves and rolling depths of one token."""

    token: str
    days: dict[date, DayRecord]
    prices: PriceSeries | None
    pivots: dict[int, BettiCurve]
    config: FeatureConfig

    def curve_series(self, dim: int) -> dict[date, BettiCurve]:
        return {d: r.curves[dim] for d, r in self.days.items()}

    def rd_series(self, dim: int) -> dict[date, float]:
        return {d: r.rd[dim] for d, r in self.days.items() if r.rd[dim] is not None}

    def matrix(self, label: LabelSpec | None = None) -> FeatureMatrix:
        """Complete rows only: a graph, a price on the day, and a defined label."""
        label = label or self.config.label
        rows = []
        if self.prices is None or not len(self.prices):
            return FeatureMatrix(self.token, rows, label.horizon, self.pivots)
        pmap = self.prices.as_dict()
        pmax = max(self.prices.prices)
        for d, rec in sorted(self.days.items()):
            if d not in pmap:
                continue
            flag = anomaly_flag(pmap, d, label)
            if flag is None:
                continue
            rd = list(rec.rd) + [None] * (3 - len(rec.rd))
            rows.append(FeatureRow(self.token, d, pmap[d] / pmax, rec.ne, rec.nv, rec.gc,
                                   rd[0], rd[1], rd[2], flag, rec.n_tx))
        return FeatureMatrix(self.token, rows, label.horizon, self.pivots)


def compute_token_features(token: str, txs: Sequence[TokenTransaction], prices: PriceSeries | None,
                           config: FeatureConfig = FeatureConfig(), backend: str | None = None,
                           graphs: Mapping[date, DailyGraph] | None = None) -> TokenFeatures:
    """Top-K daily graphs -> Betti curves -> rolling depths, plus history-wide pivots."""
    if graphs is None:
        graphs = daily_graphs(txs, config.alpha, config.k, config.normalization)
    spec = config.filtration
    curves = {d: graph_betti_curves(g, spec, backend) for d, g in sorted(graphs.items())}
    dims = range(config.max_dim + 1)
    per_dim = {p: {d: c[p] for d, c in curves.items()} for p in dims}
    rds = {p: {d: rolling_depth(per_dim[p], d, config.window) for d in per_dim[p]} for p in dims}
    days = {}
    for d, g in sorted(graphs.items()):
        ne, nv, gc = graph_summaries(g)
        days[d] = DayRecord(d, g.n_transactions, ne, nv, gc, tuple(curves[d]),
                            tuple(rds[p][d] for p in dims))
    pivots = {p: betti_pivot(list(per_dim[p].values())) for p in dims if per_dim[p]}
    log.debug("%s: %d daily graphs", token, len(days))
    return TokenFeatures(token, days, prices, pivots, config)


def build_feature_matrix(token: str, txs: Sequence[TokenTransaction], prices: PriceSeries,
                         config: FeatureConfig = FeatureConfig(), backend: str | None = None) -> FeatureMatrix:
    return compute_token_features(token, txs, prices, config, backend).matrix(config.label)


def with_horizon(config: FeatureConfig, horizon: int) -> FeatureConfig:
    return replace(config, label=replace(config.label, horizon=horizon))
