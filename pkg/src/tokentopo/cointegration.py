"""Engle-Granger and hidden (Granger-Yoon) cointegration between token series."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

# MacKinnon (2010), "Critical Values for Cointegration Tests", Queen's
# Economics Dept. WP 1227, Table 2, 5% level, constant/no trend:
# crit(T) = b0 + b1/T + b2/T^2 + b3/T^3.
CRIT_5PCT_UNIT_ROOT = (-2.86154, -2.8903, -4.234, -40.04)      # N = 1 (raw series)
CRIT_5PCT_ENGLE_GRANGER = (-3.33613, -6.1101, -6.823, 0.0)     # N = 2 (OLS residuals)
# Same model at 2.5%, which MacKinnon does not tabulate: fitted by the same
# response-surface method (tools/eg_response_surface.py, 800k draws per T).
# That fit reproduces the published 1% and 5% rows above to within 1e-3 in b0.
CRIT_2P5PCT_ENGLE_GRANGER = (-3.59287, -8.1242, -13.778, 0.0)

MIN_LENGTH = 20


class CointegrationError(ValueError):
    pass


def critical_value(coefs: Sequence[float], nobs: int) -> float:
    return sum(b / nobs ** i for i, b in enumerate(coefs))


def default_maxlag(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


@dataclass(frozen=True)
class ADFResult:
    statistic: float
    critical_value: float
    lags: int
    nobs: int
    degenerate: bool = False

    @property
    def reject_unit_root(self) -> bool:
        return self.statistic < self.critical_value


def _design(x: np.ndarray, lags: int, constant: bool, nobs: int):
    """Rows for Δx_t = [c] + γ x_{t-1} + Σ φ_i Δx_{t-i}, last ``nobs`` periods."""
    dx = np.diff(x)
    cols = [x[-nobs - 1:-1]]
    for i in range(1, lags + 1):
        cols.append(dx[-nobs - i:-i])
    if constant:
        cols.insert(0, np.ones(nobs))
    return dx[-nobs:], np.column_stack(cols)


def _ols(y: np.ndarray, X: np.ndarray):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, resid


def adf(series: Sequence[float], constant: bool = True, maxlag: int | None = None,
        crit: Sequence[float] = CRIT_5PCT_UNIT_ROOT, crit_nobs: int | None = None,
        scale: float | None = None) -> ADFResult:
    """Augmented Dickey-Fuller t-statistic with AIC lag selection.

    Lags 0..maxlag are compared on a common sample; the chosen lag is then
    refitted on all available observations. A (numerically) constant series
    is reported as stationary.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < MIN_LENGTH:
        raise CointegrationError(f"series too short for ADF: {n} < {MIN_LENGTH}")
    ref = scale if scale is not None else max(float(np.max(np.abs(x))), 1.0)
    if float(np.ptp(x)) <= 1e-10 * ref:
        return ADFResult(-math.inf, critical_value(crit, crit_nobs or n - 1), 0, n - 1, True)
    if maxlag is None:
        maxlag = default_maxlag(n)
    maxlag = max(0, min(maxlag, n // 2 - int(constant) - 1))

    nobs = n - maxlag - 1
    dy, full = _design(x, maxlag, constant, nobs)
    lead = int(constant) + 1
    best = None
    for lag in range(maxlag + 1):
        X = full[:, :lead + lag]
        _, resid = _ols(dy, X)
        ssr = float(resid @ resid)
        aic = nobs * math.log(ssr / nobs) + 2 * X.shape[1] if ssr > 0 else -math.inf
        if best is None or aic < best[0]:
            best = (aic, lag)
    lag = best[1]

    nobs = n - lag - 1
    dy, X = _design(x, lag, constant, nobs)
    beta, resid = _ols(dy, X)
    dof = nobs - X.shape[1]
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.pinv(X.T @ X)
    k = int(constant)
    se = math.sqrt(cov[k, k]) if cov[k, k] > 0 else 0.0
    stat = beta[k] / se if se > 0 else -math.inf
    return ADFResult(float(stat), critical_value(crit, crit_nobs or nobs), lag, nobs)


def adf_test(series: Sequence[float]) -> tuple[float, bool]:
    """ADF with constant on a raw series: ``(statistic, reject unit root at 5%)``."""
    res = adf(series, constant=True)
    return res.statistic, res.reject_unit_root


@dataclass(frozen=True)
class EGResult:
    statistic: float
    cointegrated: bool
    directions: tuple[ADFResult, ...] = ()


def _eg_one_way(y: np.ndarray, x: np.ndarray, crit: Sequence[float] = CRIT_5PCT_ENGLE_GRANGER) -> ADFResult:
    X = np.column_stack([np.ones(len(x)), x])
    _, resid = _ols(y, X)
    return adf(resid, constant=False, crit=crit, crit_nobs=len(y) - 1,
               scale=max(float(np.std(y)), 1e-300))


def engle_granger(y: Sequence[float], x: Sequence[float]) -> EGResult:
    """Two-step Engle-Granger test, run in both regression directions.

    Cointegrated iff either direction rejects a unit root in the residuals.
    Each direction is tested at 2.5% so the combined verdict keeps a 5% level;
    two 5% directions would reject about 8.5% of independent random walks.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(y) != len(x):
        raise CointegrationError("series lengths differ")
    if len(y) < MIN_LENGTH:
        raise CointegrationError(f"series too short: {len(y)} < {MIN_LENGTH}")
    for name, s in (("x", x), ("y", y)):
        if float(np.ptp(s)) <= 1e-12 * max(float(np.max(np.abs(s))), 1e-300):
            raise CointegrationError(f"{name} has zero variance")
    fwd, back = _eg_one_way(y, x, CRIT_2P5PCT_ENGLE_GRANGER), _eg_one_way(x, y, CRIT_2P5PCT_ENGLE_GRANGER)
    stat = min(fwd.statistic, back.statistic)
    return EGResult(stat, fwd.reject_unit_root or back.reject_unit_root, (fwd, back))


def shock_components(s: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative positive and negative shocks; their sum reconstructs ``s``."""
    s = np.asarray(s, dtype=float)
    d = np.diff(s)
    pos = np.concatenate([[s[0]], s[0] + np.cumsum(np.maximum(d, 0.0))])
    neg = np.concatenate([[0.0], np.cumsum(np.minimum(d, 0.0))])
    return pos, neg


@dataclass(frozen=True)
class HiddenResult:
    cointegrated: bool
    components: dict          # "+,+" / "-,-" -> EGResult or None when skipped
    statistic: float


def hidden_cointegration(y: Sequence[float], x: Sequence[float]) -> HiddenResult:
    """Engle-Granger on (y+, x+) and (y-, x-); hidden-cointegrated iff either passes."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(y) != len(x):
        raise CointegrationError("series lengths differ")
    yp, yn = shock_components(y)
    xp, xn = shock_components(x)
    comps = {}
    for key, a, b in (("+,+", yp, xp), ("-,-", yn, xn)):
        try:
            comps[key] = engle_granger(a, b)
        except CointegrationError as exc:
            log.debug("component %s skipped: %s", key, exc)
            comps[key] = None
    done = [r for r in comps.values() if r is not None]
    stat = min((r.statistic for r in done), default=math.nan)
    return HiddenResult(any(r.cointegrated for r in done), comps, stat)


@dataclass(frozen=True)
class CointResult:
    pair: tuple[str, str]
    channel: str
    period: str
    adf_stat: float
    verdict: bool
    component_verdicts: dict
    eg_verdict: bool | None = None
    nobs: int = 0

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "channel": self.channel, "period": self.period,
                "adf_stat": None if not math.isfinite(self.adf_stat) else self.adf_stat,
                "verdict": self.verdict, "component_verdicts": self.component_verdicts,
                "eg_verdict": self.eg_verdict, "nobs": self.nobs}


@dataclass
class ProtocolResult:
    channel: str
    results: list[CointResult] = field(default_factory=list)
    skipped: list[tuple[str, str, str]] = field(default_factory=list)

    def edges(self, period: str) -> list[tuple[str, str]]:
        return [r.pair for r in self.results if r.period == period and r.verdict]

    def to_dict(self) -> dict:
        return {"channel": self.channel,
                "results": [r.to_dict() for r in self.results],
                "edges": {p: [list(e) for e in self.edges(p)] for p in ("first", "second")},
                "skipped": [{"pair": [a, b], "reason": why} for a, b, why in self.skipped]}


def _test_period(a: str, b: str, channel: str, period: str, ya, xa) -> CointResult:
    hidden = hidden_cointegration(ya, xa)
    try:
        eg = engle_granger(ya, xa).cointegrated
    except CointegrationError:
        eg = None
    comps = {k: (None if v is None else v.cointegrated) for k, v in hidden.components.items()}
    return CointResult((a, b), channel, period, hidden.statistic, hidden.cointegrated, comps, eg, len(ya))


def pairwise_protocol(series: Mapping[str, Mapping[date, float]], channel: str,
                      min_overlap: int = 2 * MIN_LENGTH) -> ProtocolResult:
    """Hidden-cointegration tests for every unordered token pair, in two periods.

    The pair's common dates are split in half (first half / second half).
    """
    out = ProtocolResult(channel)
    for a, b in combinations(sorted(series), 2):
        common = sorted(set(series[a]) & set(series[b]))
        if len(common) < min_overlap:
            out.skipped.append((a, b, f"overlap {len(common)} < {min_overlap} days"))
            continue
        half = len(common) // 2
        for period, days in (("first", common[:half]), ("second", common[half:])):
            ya = np.array([series[a][d] for d in days])
            xa = np.array([series[b][d] for d in days])
            try:
                out.results.append(_test_period(a, b, channel, period, ya, xa))
            except CointegrationError as exc:
                out.skipped.append((a, b, f"{period}: {exc}"))
    return out


def cross_period_summary(price: ProtocolResult, channel: ProtocolResult) -> dict:
    """Pairs cointegrated in price in both periods vs. in ``channel`` first, then price."""
    price_first = set(price.edges("first"))
    price_second = set(price.edges("second"))
    chan_first = set(channel.edges("first"))
    pp = sorted(price_first & price_second)
    cp = sorted(chan_first & price_second)
    return {"price_then_price": len(pp), f"{channel.channel}_then_price": len(cp),
            "price_then_price_pairs": [list(p) for p in pp],
            f"{channel.channel}_then_price_pairs": [list(p) for p in cp],
            "first_period_overlap": [list(p) for p in sorted(price_first & chan_first)]}
