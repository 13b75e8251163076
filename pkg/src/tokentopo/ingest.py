"""Transaction/price parsing, daily graph aggregation, top-K hub filtering."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

log = logging.getLogger(__name__)

TX_COLUMNS = ("token", "from", "to", "amount", "timestamp")
PRICE_COLUMNS = ("token", "date", "open")


class InputError(ValueError):
    """Malformed or missing input data."""


@dataclass(frozen=True)
class TokenTransaction:
    token: str
    sender: str
    receiver: str
    amount: float
    timestamp: int

    @property
    def day(self) -> date:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc).date()


@dataclass(frozen=True)
class PriceSeries:
    token: str
    dates: tuple[date, ...]
    prices: tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.prices):
            raise InputError("dates and prices differ in length")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise InputError(f"{self.token}: price dates not strictly increasing at {b}")
        for d, p in zip(self.dates, self.prices):
            if not p > 0 or not math.isfinite(p):
                raise InputError(f"{self.token}: non-positive price on {d}")

    def __len__(self) -> int:
        return len(self.dates)

    def as_dict(self) -> dict[date, float]:
        return dict(zip(self.dates, self.prices))


@dataclass(frozen=True)
class Edge:
    amount: float
    weight: float


@dataclass(frozen=True)
class DailyGraph:
    """Undirected weighted token graph for one day.

    ``edges`` maps a sorted address pair to its aggregated amount and weight.
    Pairs not in ``edges`` have infinite dissimilarity.
    """

    token: str
    date: date
    nodes: frozenset[str]
    edges: Mapping[tuple[str, str], Edge] = field(default_factory=dict)
    n_transactions: int = 0

    @property
    def is_empty(self) -> bool:
        return not self.edges

    def degree(self) -> dict[str, int]:
        deg = dict.fromkeys(self.nodes, 0)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg


def _check_header(header, expected, path):
    if header is None or tuple(h.strip() for h in header) != expected:
        raise InputError(f"{path}: expected header {','.join(expected)}, got {header}")


def load_transactions(path: str | Path, token: str | None = None) -> list[TokenTransaction]:
    """Read ``token,from,to,amount,timestamp`` rows; drop self-loops; sort by time.

    With ``token=None`` every token is returned.
    """
    out = []
    seen = False
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), TX_COLUMNS, path)
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != len(TX_COLUMNS):
                raise InputError(f"{path}:{line}: expected {len(TX_COLUMNS)} fields, got {len(row)}")
            tok, sender, receiver, amount, ts = (c.strip() for c in row)
            if token is not None and tok != token:
                continue
            seen = True
            try:
                amount_v = float(amount)
                ts_v = int(float(ts))
            except ValueError:
                raise InputError(f"{path}:{line}: unparseable amount or timestamp") from None
            if not math.isfinite(amount_v) or amount_v < 0:
                raise InputError(f"{path}:{line}: negative or non-finite amount {amount!r}")
            if not sender or not receiver:
                raise InputError(f"{path}:{line}: empty address")
            if sender == receiver:
                continue
            out.append(TokenTransaction(tok, sender, receiver, amount_v, ts_v))
    if token is not None and not seen:
        log.warning("no transactions for token %r in %s", token, path)
    out.sort(key=lambda t: (t.timestamp, t.sender, t.receiver, t.amount))
    return out


def load_prices(path: str | Path, token: str | None = None) -> dict[str, PriceSeries]:
    """Read ``token,date,open`` rows into one PriceSeries per token."""
    rows: dict[str, list[tuple[date, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), PRICE_COLUMNS, path)
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != len(PRICE_COLUMNS):
                raise InputError(f"{path}:{line}: expected {len(PRICE_COLUMNS)} fields, got {len(row)}")
            tok, day, price = (c.strip() for c in row)
            if token is not None and tok != token:
                continue
            try:
                d = date.fromisoformat(day)
                p = float(price)
            except ValueError:
                raise InputError(f"{path}:{line}: unparseable date or price") from None
            if not p > 0 or not math.isfinite(p):
                raise InputError(f"{path}:{line}: price must be positive, got {price!r}")
            rows.setdefault(tok, []).append((d, p))
    series = {}
    for tok, entries in rows.items():
        entries.sort()
        series[tok] = PriceSeries(tok, tuple(d for d, _ in entries), tuple(p for _, p in entries))
    return series


def group_by_day(txs: Iterable[TokenTransaction]) -> dict[date, list[TokenTransaction]]:
    days: dict[date, list[TokenTransaction]] = {}
    for tx in txs:
        days.setdefault(tx.day, []).append(tx)
    return dict(sorted(days.items()))


def edge_weights(amounts: Mapping[tuple[str, str], float], alpha: float) -> dict[tuple[str, str], Edge]:
    """Dissimilarity ``1 / (1 + alpha * (A - A_min) / (A_max - A_min))`` per edge.

    Equal amounts everywhere (A_min == A_max) give weight 1.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not amounts:
        return {}
    lo = min(amounts.values())
    hi = max(amounts.values())
    span = hi - lo
    out = {}
    for pair, a in amounts.items():
        w = 1.0 if span == 0 else 1.0 / (1.0 + alpha * (a - lo) / span)
        out[pair] = Edge(a, w)
    return out


def build_daily_graph(txs: Iterable[TokenTransaction], day: date, alpha: float = 9.0,
                      token: str | None = None) -> DailyGraph:
    amounts: dict[tuple[str, str], float] = {}
    nodes = set()
    n = 0
    for tx in txs:
        if tx.day != day:
            raise ValueError(f"transaction at {tx.timestamp} is not on {day}")
        if token is None:
            token = tx.token
        if tx.sender == tx.receiver:
            continue
        pair = (tx.sender, tx.receiver) if tx.sender < tx.receiver else (tx.receiver, tx.sender)
        amounts[pair] = amounts.get(pair, 0.0) + tx.amount
        nodes.update(pair)
        n += 1
    if not amounts:
        log.debug("empty graph for %s on %s", token, day)
    return DailyGraph(token or "", day, frozenset(nodes), edge_weights(amounts, alpha), n)


def top_k_filter(g: DailyGraph, k: int = 150, alpha: float = 9.0, renormalize: bool = True) -> DailyGraph:
    """Induced subgraph on the ``k`` highest-degree nodes.

    Degree ties go to the larger total incident amount, then the smaller
    address. With ``renormalize`` the weights are recomputed from the
    induced graph's amount range; otherwise the input weights are kept.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(g.nodes) <= k:
        return g
    deg = g.degree()
    volume = dict.fromkeys(g.nodes, 0.0)
    for (u, v), e in g.edges.items():
        volume[u] += e.amount
        volume[v] += e.amount
    keep = set(sorted(g.nodes, key=lambda a: (-deg[a], -volume[a], a))[:k])
    kept = {p: e for p, e in g.edges.items() if p[0] in keep and p[1] in keep}
    if renormalize:
        kept = edge_weights({p: e.amount for p, e in kept.items()}, alpha)
    return DailyGraph(g.token, g.date, frozenset(keep), kept, g.n_transactions)


def daily_graphs(txs: Iterable[TokenTransaction], alpha: float = 9.0, k: int | None = 150,
                 normalization: str = "post-filter") -> dict[date, DailyGraph]:
    """All non-empty daily graphs of one token, top-K filtered when ``k`` is set."""
    if normalization not in ("post-filter", "pre-filter"):
        raise ValueError(f"unknown amount normalization {normalization!r}")
    out = {}
    for day, batch in group_by_day(txs).items():
        g = build_daily_graph(batch, day, alpha)
        if k is not None:
            g = top_k_filter(g, k, alpha, renormalize=normalization == "post-filter")
        if not g.is_empty:
            out[day] = g
    return out
