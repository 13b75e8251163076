"""Synthetic token histories with a planted topology -> price-shock signal.

Every day has the same graph skeleton statistics: a 6-address community
that is fully connected, a hub with 16 counterparties and a random sparse
background. Only the flow of large amounts moves. On ordinary days the large
transfers circulate inside the community ("clique burst"); on the 1-2 days
before each price shock they route through the hub ("hub regime"). Edge and
node counts and the clustering coefficient therefore carry no signal, while
the Betti curves of the weighted graph do.

Run ``python -m tokentopo.synth OUT_DIR`` to write the bundled toy fixture.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np

from .ingest import PriceSeries, TokenTransaction

START = date(2018, 1, 1)


@dataclass
class SyntheticToken:
    token: str
    transactions: list[TokenTransaction]
    prices: PriceSeries
    shock_days: list[date]
    precursor_days: list[date]


def _ts(day: date, rng: np.random.Generator) -> int:
    base = datetime.combine(day, time(0), tzinfo=timezone.utc).timestamp()
    return int(base) + int(rng.integers(0, 86400))


def _day_transactions(token: str, day: date, rng: np.random.Generator, hub_regime: bool,
                      n_background: int = 20, n_leaves: int = 16, p_edge: float = 0.08) -> list[TokenTransaction]:
    pool = rng.choice(400, size=n_background, replace=False)
    community = [f"c{i}" for i in range(6)]
    hub = "hub"
    leaves = [f"l{i}" for i in rng.choice(60, size=n_leaves, replace=False)]
    background = [f"b{i}" for i in pool]

    heavy = lambda: float(rng.uniform(800, 1000))   # noqa: E731
    light = lambda: float(rng.uniform(1, 60))        # noqa: E731
    txs = []

    def add(a, b, amount):
        txs.append(TokenTransaction(token, a, b, amount, _ts(day, rng)))

    for i in range(6):
        for j in range(i + 1, 6):
            add(community[i], community[j], light() if hub_regime else heavy())
    for leaf in leaves:
        add(hub, leaf, heavy() if hub_regime else light())
    nodes = background + leaves[:4] + community[:2]
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if rng.random() < p_edge:
                add(nodes[i], nodes[j], light())
    for _ in range(int(rng.integers(0, 4))):
        tx = txs[int(rng.integers(len(txs)))]
        add(tx.sender, tx.receiver, light())   # repeated transfers on an existing edge
    return txs


def planted_signal_token(seed: int, days: int = 300, token: str = "synth", start: date = START,
                         noise_sd: float = 0.02, gap: tuple[int, int] = (12, 26)) -> SyntheticToken:
    """Token whose price shocks (|R| >= 0.3) follow a 1-2 day hub regime."""
    rng = np.random.default_rng(seed)
    shocks = []
    s = int(rng.integers(8, 15))
    while s < days - 1:
        shocks.append(s)
        s += int(rng.integers(gap[0], gap[1] + 1))
    precursor = set()
    for s in shocks:
        lead = int(rng.integers(1, 3))
        precursor.update(range(max(s - lead, 0), s))

    returns = np.clip(rng.normal(0.0, noise_sd, size=days), -0.1, 0.1)
    for s in shocks:
        returns[s] = rng.uniform(0.3, 0.45) * (1 if rng.random() < 0.5 else -1)
    returns[0] = 0.0
    prices = 10.0 * np.cumprod(1.0 + returns)

    dates = [start + timedelta(days=i) for i in range(days)]
    txs = []
    for i, d in enumerate(dates):
        txs.extend(_day_transactions(token, d, rng, i in precursor))
    txs.sort(key=lambda t: (t.timestamp, t.sender, t.receiver, t.amount))
    ps = PriceSeries(token, tuple(dates), tuple(float(p) for p in prices))
    return SyntheticToken(token, txs, ps, [dates[s] for s in shocks], [dates[i] for i in sorted(precursor)])


def write_csv(tokens: list[SyntheticToken], out_dir: str | Path, prefix: str = "") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tx_path = out / f"{prefix}transactions.csv"
    price_path = out / f"{prefix}prices.csv"
    with open(tx_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["token", "from", "to", "amount", "timestamp"])
        for t in tokens:
            for tx in t.transactions:
                w.writerow([tx.token, tx.sender, tx.receiver, f"{tx.amount:.6f}", tx.timestamp])
    with open(price_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["token", "date", "open"])
        for t in tokens:
            for d, p in zip(t.prices.dates, t.prices.prices):
                w.writerow([t.token, d.isoformat(), f"{p:.8f}"])
    return tx_path, price_path


def toy_fixture(days: int = 32) -> list[SyntheticToken]:
    return [planted_signal_token(11, days, "alpha", gap=(7, 10)),
            planted_signal_token(12, days, "beta", gap=(7, 10))]


def main(argv=None):
    ap = argparse.ArgumentParser(description="Write the two-token toy fixture CSVs.")
    ap.add_argument("out_dir")
    ap.add_argument("--days", type=int, default=32)
    args = ap.parse_args(argv)
    paths = write_csv(toy_fixture(args.days), args.out_dir, prefix="toy_")
    print(*paths, sep="\n")


if __name__ == "__main__":
    main()
