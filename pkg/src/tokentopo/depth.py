"""Modified band depth of Betti curves, Betti pivots and rolling depth."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .homology import BettiCurve


class DepthError(ValueError):
    pass


@dataclass(frozen=True)
class DepthScore:
    value: float
    subject: BettiCurve
    collection_size: int


def _merged_grid(curves: Sequence[BettiCurve], cap: float):
    pts = np.unique(np.concatenate([np.asarray(c.breakpoints, dtype=float) for c in curves] + [[0.0, cap]]))
    pts = pts[(pts >= 0) & (pts <= cap)]
    return pts[:-1], np.diff(pts)


def band_fraction(subject_values: np.ndarray, values: np.ndarray, include_self_pairs: bool = False) -> np.ndarray:
    """Per grid cell, fraction of curve pairs whose band contains the subject.

    ``values`` is ``(m, cells)``. Bands are closed. The pair count is
    ``C(m, 2)`` (plus ``m`` self-pairs when requested).
    """
    m = values.shape[0]
    below = (values < subject_values).sum(axis=0)
    above = (values > subject_values).sum(axis=0)
    inside = comb(m, 2) - below * (below - 1) // 2 - above * (above - 1) // 2
    total = comb(m, 2)
    if include_self_pairs:
        inside = inside + (m - below - above)
        total += m
    return inside / total


def mbd(subject: BettiCurve, collection: Sequence[BettiCurve], include_self_pairs: bool = False) -> DepthScore:
    """Modified band depth of ``subject`` w.r.t. ``collection`` on ``[0, scale_cap]``.

    Lebesgue measure is computed exactly on the merged breakpoint grid of all
    curves involved.
    """
    m = len(collection)
    if m < 2:
        raise DepthError(f"modified band depth needs at least 2 curves, got {m}")
    cap = subject.scale_cap
    for c in collection:
        if c.dim != subject.dim or c.scale_cap != cap:
            raise DepthError("curves must share dimension and domain")
    left, width = _merged_grid([subject, *collection], cap)
    vals = np.stack([c.evaluate(left) for c in collection])
    frac = band_fraction(subject.evaluate(left), vals, include_self_pairs)
    value = float(np.dot(frac, width) / cap)
    return DepthScore(min(max(value, 0.0), 1.0), subject, m)


def all_depths(collection: Sequence[BettiCurve], include_self_pairs: bool = False) -> np.ndarray:
    """MBD of every member against the full collection (shared grid)."""
    m = len(collection)
    if m < 2:
        raise DepthError(f"modified band depth needs at least 2 curves, got {m}")
    cap = collection[0].scale_cap
    left, width = _merged_grid(collection, cap)
    vals = np.stack([c.evaluate(left) for c in collection])
    # per cell, count members strictly below/above each member: shift column j
    # by j * (max + 1) so one flat searchsorted ranks all cells at once
    shifted = vals + np.arange(vals.shape[1]) * (int(vals.max()) + 1)
    flat = np.sort(shifted, axis=None)
    below = np.searchsorted(flat, shifted, side="left") - np.arange(vals.shape[1]) * m
    above = (np.arange(1, vals.shape[1] + 1) * m) - np.searchsorted(flat, shifted, side="right")
    total = comb(m, 2)
    inside = total - below * (below - 1) // 2 - above * (above - 1) // 2
    if include_self_pairs:
        inside = inside + (m - below - above)
        total += m
    out = (inside / total) @ width / cap
    return np.clip(out, 0.0, 1.0)


def betti_pivot(collection: Sequence[BettiCurve]) -> BettiCurve:
    """Deepest member by MBD; ties go to the earliest date, then list order."""
    if not collection:
        raise DepthError("empty collection has no pivot")
    if len(collection) == 1:
        return collection[0]
    depths = all_depths(collection)
    best = depths.max()
    ties = [i for i in range(len(collection)) if depths[i] >= best - 1e-12]
    dated = [i for i in ties if collection[i].date is not None]
    if dated:
        return collection[min(dated, key=lambda i: (collection[i].date, i))]
    return collection[ties[0]]


def rolling_depth(series: Mapping[date, BettiCurve], t: date, window: int = 7) -> float | None:
    """MBD of day ``t``'s curve within the calendar window ``[t - window + 1, t]``.

    Uses whatever days of the window exist; with no other curve available
    the depth is 1. Returns None when there is no curve on ``t``.
    """
    if window < 2:
        raise DepthError("window must be >= 2")
    if t not in series:
        return None
    ref = [series[t - timedelta(days=i)] for i in range(window) if t - timedelta(days=i) in series]
    if len(ref) < 2:
        return 1.0
    return mbd(series[t], ref).value


def rolling_depths(series: Mapping[date, BettiCurve], window: int = 7) -> dict[date, float]:
    return {t: rolling_depth(series, t, window) for t in sorted(series)}
