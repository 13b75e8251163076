"""Command-line pipeline: ingest -> Betti curves -> depths -> features -> forests -> cointegration."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .cointegration import cross_period_summary, pairwise_protocol
from .features import FeatureConfig, LabelSpec, TokenFeatures, compute_token_features
from .forecast import MODEL_FEATURES, Metrics, ModelSpec, agreement_counts, fit_evaluate, reliable_from_scan, shared_positives
from .ingest import InputError, PriceSeries, load_prices, load_transactions

log = logging.getLogger("tokentopo")

EXIT_OK = 0
EXIT_INPUT = 3
EXIT_TOKEN_FAILURE = 4

OUTPUTS = ("features.csv", "betti_curves.csv", "predictions.csv", "metrics.json", "cointegration.json")


@dataclass
class PipelineConfig:
    transactions: str
    prices: str
    out: str
    tokens: list[str] = field(default_factory=list)
    k: int = 150
    alpha: float = 9.0
    delta: float = 0.25
    horizon: int = 2
    max_horizon: int = 7
    window: int = 7
    max_dim: int = 2
    trees: int = 500
    mtry: str = "auto"
    min_leaf: int = 1
    balanced: bool = False
    seed: int = 0
    train_frac: float = 2 / 3
    rho: float = 0.9
    coint_channel: str = "rd1"
    normalization: str = "post-filter"
    tx_count_column: bool = False
    jobs: int = 1

    def validate(self):
        if self.k < 1 or self.alpha <= 0 or self.delta <= 0 or self.horizon < 1:
            raise InputError("k, alpha, delta and horizon must be positive")
        if not 0 <= self.max_dim <= 2:
            raise InputError("--max-dim must be in 0..2")
        if self.window < 2 or self.trees < 1 or self.jobs < 1:
            raise InputError("--window must be >= 2, --trees and --jobs >= 1")
        if not 0 < self.train_frac < 1 or not 0 < self.rho < 1:
            raise InputError("--train-frac and --rho must lie in (0, 1)")
        if self.coint_channel not in ("rd0", "rd1", "rd2"):
            raise InputError("--coint-channel must be rd0, rd1 or rd2")
        if int(self.coint_channel[-1]) > self.max_dim:
            raise InputError(f"--coint-channel {self.coint_channel} needs --max-dim >= {self.coint_channel[-1]}")

    @property
    def features(self) -> FeatureConfig:
        return FeatureConfig(self.k, self.alpha, self.window, self.max_dim, 1.0, self.normalization,
                             LabelSpec(self.delta, self.horizon))

    def models(self) -> list[str]:
        return [m for m, cols in MODEL_FEATURES.items()
                if all(not c.startswith("rd") or int(c[2]) <= self.max_dim for c in cols)]

    def model_spec(self, model: str) -> ModelSpec:
        mtry = self.mtry if self.mtry in ("auto", "sqrt", "all") else int(self.mtry)
        return ModelSpec(model, self.trees, mtry, self.seed, self.min_leaf, self.balanced)


class StageError(RuntimeError):
    def __init__(self, token, stage, message, date=None):
        super().__init__(message)
        self.token, self.stage, self.date = token, stage, date

    def to_dict(self):
        return {"token": self.token, "stage": self.stage, "date": self.date, "error": str(self)}


@dataclass
class TokenResult:
    token: str
    features: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    predictions: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    positives: dict = field(default_factory=dict)
    pooled: dict = field(default_factory=dict)
    price_series: dict = field(default_factory=dict)
    rd_series: dict = field(default_factory=dict)
    error: dict | None = None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def process_token(token: str, txs, prices: PriceSeries | None, cfg: PipelineConfig) -> TokenResult:
    """Full per-token pipeline; failures are captured, never raised."""
    res = TokenResult(token)
    stage = "features"
    try:
        if prices is None:
            raise StageError(token, "ingest", "no price series for token")
        tf: TokenFeatures = compute_token_features(token, txs, prices, cfg.features)
        for d, rec in sorted(tf.days.items()):
            for c in rec.curves:
                for b, v in zip(c.breakpoints, c.values):
                    res.curves.append((token, d.isoformat(), c.dim, b, v))
        pmap = prices.as_dict()
        res.price_series = {d: pmap[d] for d in tf.days if d in pmap}
        res.rd_series = {p: tf.rd_series(p) for p in range(cfg.max_dim + 1)}

        matrices = {}
        horizons = sorted(set(range(1, cfg.max_horizon + 1)) | {cfg.horizon})
        for h in horizons:
            matrices[h] = tf.matrix(LabelSpec(cfg.delta, h))
        primary = matrices[cfg.horizon]
        for r in primary.rows:
            row = [r.token, r.date.isoformat(), r.pn, r.ne, r.nv, r.gc, r.rd0, r.rd1, r.rd2, r.label]
            if cfg.tx_count_column:
                row.append(r.n_tx)
            res.features.append(row)

        stage = "forecast"
        scans: dict[str, dict[int, Metrics]] = {m: {} for m in cfg.models()}
        for h in horizons:
            if len(matrices[h]) < 3:
                continue
            for model in cfg.models():
                _, test, pred, frac, met = fit_evaluate(matrices[h], cfg.model_spec(model), cfg.train_frac)
                scans[model][h] = met
                if h == cfg.horizon:
                    res.positives[model] = list(met.positive_days)
                    for d, p, f, lab in zip(test.dates, pred, frac, test.labels):
                        res.predictions.append((token, d.isoformat(), model, float(f), bool(p), bool(lab)))
        n = len(primary)
        cut = None
        if n >= 3:
            cut = (2 * n) // 3 if abs(cfg.train_frac - 2 / 3) < 1e-3 else int(math.floor(n * cfg.train_frac))
        res.metrics = {
            "rows": n,
            "train_rows": cut,
            "test_rows": None if cut is None else n - cut,
            "test_anomalies": None if cut is None else int(sum(r.label for r in primary.rows[cut:])),
            "horizons": {str(h): {m: scans[m][h].to_dict() for m in scans if h in scans[m]}
                         for h in horizons},
            "max_reliable_horizon": {m: reliable_from_scan({h: v for h, v in scans[m].items()
                                                            if h <= cfg.max_horizon}, cfg.rho)
                                     for m in scans},
            "pivots": {str(p): {"date": c.date.isoformat() if c.date else None,
                                "breakpoints": list(c.breakpoints), "values": list(c.values)}
                       for p, c in tf.pivots.items()},
        }
        res.pooled = {h: {m: scans[m][h] for m in scans if h in scans[m]} for h in horizons}
    except StageError as exc:
        res.error = exc.to_dict()
    except Exception as exc:  # isolate token failures
        log.debug("token %s failed", token, exc_info=True)
        res.error = {"token": token, "stage": stage, "date": None,
                     "error": f"{type(exc).__name__}: {exc}",
                     "trace": traceback.format_exc(limit=3)}
    return res


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _clean(obj):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def run_pipeline(cfg: PipelineConfig) -> int:
    cfg.validate()
    for p in (cfg.transactions, cfg.prices):
        if not Path(p).is_file():
            raise InputError(f"input file not found: {p}")
    txs = load_transactions(cfg.transactions)
    prices = load_prices(cfg.prices)
    by_token: dict[str, list] = {}
    for tx in txs:
        by_token.setdefault(tx.token, []).append(tx)
    tokens = sorted(by_token)
    if cfg.tokens:
        unknown = sorted(set(cfg.tokens) - set(tokens))
        for t in unknown:
            log.warning("token %r not found in %s", t, cfg.transactions)
        tokens = [t for t in tokens if t in set(cfg.tokens)]
    if not tokens:
        log.warning("no tokens to process")

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(t, by_token[t], prices.get(t), cfg) for t in tokens]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(process_token, *zip(*jobs)))
    else:
        results = [process_token(*j) for j in jobs]

    ok = [r for r in results if r.error is None]
    errors = [r.error for r in results if r.error is not None]
    for e in errors:
        log.error("token %s failed at stage %s: %s", e["token"], e["stage"], e["error"])

    feat_header = ["token", "date", "pn", "ne", "nv", "gc", "rd0", "rd1", "rd2", "label"]
    if cfg.tx_count_column:
        feat_header.append("n_tx")
    texts = {
        "features.csv": _csv_text(feat_header, [row for r in ok for row in r.features]),
        "betti_curves.csv": _csv_text(["token", "date", "dim", "breakpoint", "value"],
                                      [row for r in ok for row in r.curves]),
        "predictions.csv": _csv_text(["token", "date", "model", "vote_fraction", "prediction", "label"],
                                     [row for r in ok for row in r.predictions]),
    }

    aggregate = {}
    for h in sorted({h for r in ok for h in r.pooled}):
        pooled = {}
        for m in cfg.models():
            parts = [r.pooled[h][m] for r in ok if h in r.pooled and m in r.pooled[h]]
            if parts:
                total = parts[0]
                for p in parts[1:]:
                    total = total + p
                pooled[m] = total.to_dict()
        aggregate[str(h)] = pooled
    positives = {m: [tuple(d) for r in ok for d in r.positives.get(m, [])] for m in cfg.models()}
    betti_models = [m for m in ("M2", "M3", "M4") if m in positives]
    metrics = {
        "horizon": cfg.horizon,
        "per_token": {r.token: r.metrics for r in ok},
        "aggregate": aggregate,
        "agreement": {"horizon": cfg.horizon,
                      "regions": agreement_counts(positives),
                      "positive_predictions": {m: len(v) for m, v in positives.items()},
                      "shared_betti_models": shared_positives(positives, betti_models) if betti_models else 0},
        "errors": errors,
    }
    texts["metrics.json"] = _json_text(_clean(metrics))

    channel = int(cfg.coint_channel[-1])
    price_res = pairwise_protocol({r.token: r.price_series for r in ok}, "price")
    chan_res = pairwise_protocol({r.token: r.rd_series.get(channel, {}) for r in ok}, cfg.coint_channel)
    coint = {"price": price_res.to_dict(), cfg.coint_channel: chan_res.to_dict(),
             "summary": cross_period_summary(price_res, chan_res)}
    texts["cointegration.json"] = _json_text(_clean(coint))

    for name, text in texts.items():
        _write_atomic(out / name, text)
    manifest = {
        "config": asdict(cfg),
        "seed": cfg.seed,
        "versions": {"tokentopo": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "kernels": kernels.backend_name()},
        "inputs": {"transactions": _sha256(cfg.transactions), "prices": _sha256(cfg.prices)},
        "outputs": {name: _sha256(out / name) for name in texts},
        "tokens": tokens,
        "failed_tokens": [e["token"] for e in errors],
    }
    _write_atomic(out / "manifest.json", _json_text(manifest))
    return EXIT_TOKEN_FAILURE if errors else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tokentopo", description=__doc__)
    ap.add_argument("--transactions", required=True, help="CSV: token,from,to,amount,timestamp")
    ap.add_argument("--prices", required=True, help="CSV: token,date,open")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--token", dest="tokens", action="append", default=[], metavar="NAME",
                    help="restrict to this token (repeatable)")
    ap.add_argument("--k", type=int, default=150, help="top-K hub filter size")
    ap.add_argument("--alpha", type=float, default=9.0, help="weight scale; weights lie in [1/(1+alpha), 1]")
    ap.add_argument("--amount-normalization", dest="normalization", default="post-filter",
                    choices=["post-filter", "pre-filter"])
    ap.add_argument("--delta", type=float, default=0.25, help="absolute return threshold for anomalies")
    ap.add_argument("--horizon", type=int, default=2, help="prediction horizon in days")
    ap.add_argument("--max-horizon", type=int, default=7,
                    help="horizons 1..N are scanned for the max reliable horizon (0 disables)")
    ap.add_argument("--window", type=int, default=7, help="rolling depth window")
    ap.add_argument("--max-dim", type=int, default=2)
    ap.add_argument("--trees", type=int, default=500)
    ap.add_argument("--mtry", default="auto", help="auto|sqrt (floor sqrt p), all (bagging) or an integer")
    ap.add_argument("--min-leaf", type=int, default=1)
    ap.add_argument("--balanced", action="store_true", help="class-balanced bootstrap samples")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train-frac", type=float, default=2 / 3)
    ap.add_argument("--rho", type=float, default=0.9, help="accuracy floor for the reliable horizon")
    ap.add_argument("--coint-channel", default="rd1", choices=["rd0", "rd1", "rd2"])
    ap.add_argument("--tx-count-column", action="store_true", help="append raw transaction counts to features.csv")
    ap.add_argument("--jobs", type=int, default=1, help="tokens processed in parallel")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    opts = vars(args)
    opts.pop("verbose")
    cfg = PipelineConfig(**opts)
    try:
        return run_pipeline(cfg)
    except InputError as exc:
        print(json.dumps({"stage": "input", "error": str(exc)}), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
