"""Trigger-style analysis of a trained model: working point, efficiency, heat maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, DataError, Standardizer
from .network import MonotonicNetwork

__all__ = [
    "model_features",
    "model_response",
    "threshold_for_rate",
    "EfficiencyBin",
    "efficiency_vs_lifetime",
    "lifetime_bins",
    "efficiency_nondecreasing",
    "heatmap",
    "grid_monotone",
    "roc_auc",
]

LOW_STAT = 50


def model_features(net: MonotonicNetwork) -> tuple[str, ...]:
    std = net.extras.get("standardization")
    if std is None:
        raise DataError("model carries no feature standardization; train it on a dataset first")
    return tuple(std["feature_names"])


def model_response(net: MonotonicNetwork, X_raw: np.ndarray) -> np.ndarray:
    """``f`` on raw feature values, using the standardization stored in the model."""
    std = Standardizer.from_dict(net.extras["standardization"])
    return net.f(std.transform(X_raw))


def threshold_for_rate(background_responses, rate: float) -> float:
    """Threshold ``t`` with a fraction ``rate`` of background responses ``>= t``.

    Linear interpolation between order statistics.
    """
    r = np.asarray(background_responses, dtype=np.float64)
    if r.size == 0:
        raise DataError("no background events to fix the threshold on")
    if not 0 < rate < 1:
        raise ValueError(f"background rate must lie in (0, 1), got {rate}")
    return float(np.quantile(r, 1.0 - rate))


@dataclass(frozen=True)
class EfficiencyBin:
    lo: float
    hi: float
    n: int
    passed: int

    @property
    def efficiency(self) -> float:
        return self.passed / self.n if self.n else float("nan")

    @property
    def error(self) -> float:
        if not self.n:
            return float("nan")
        e = self.efficiency
        return float(np.sqrt(e * (1 - e) / self.n))

    @property
    def low_stat(self) -> bool:
        return self.n < LOW_STAT


def lifetime_bins(lo: float = 0.1, hi: float = 20.0, n: int = 20) -> np.ndarray:
    return np.geomspace(lo, hi, n + 1)


def efficiency_vs_lifetime(signal_responses, lifetimes, threshold: float, edges=None) -> list[EfficiencyBin]:
    resp = np.asarray(signal_responses, dtype=np.float64)
    tau = np.asarray(lifetimes, dtype=np.float64)
    if resp.size == 0:
        raise DataError("no signal events")
    edges = lifetime_bins() if edges is None else np.asarray(edges)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (tau >= lo) & (tau < hi)
        out.append(EfficiencyBin(float(lo), float(hi), int(sel.sum()), int((resp[sel] >= threshold).sum())))
    return out


def efficiency_nondecreasing(bins: Sequence[EfficiencyBin], above: float = 2.0, n_sigma: float = 2.0) -> bool:
    """True if no later bin falls below an earlier one by more than ``n_sigma`` errors.

    Only bins starting at or above ``above`` ps with enough statistics are
    compared; every ordered pair is checked, not just neighbours.
    """
    good = [b for b in bins if b.lo >= above and not b.low_stat]
    for i, a in enumerate(good):
        for b in good[i + 1 :]:
            if b.efficiency < a.efficiency - n_sigma * np.hypot(a.error, b.error):
                return False
    return True


def heatmap(
    net: MonotonicNetwork,
    feature_x: str,
    feature_y: str,
    x_values: Sequence[float],
    y_values: Sequence[float],
    fixed_values: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Response on the grid; returns shape (len(y_values), len(x_values))."""
    names = model_features(net)
    for f in (feature_x, feature_y):
        if f not in names:
            raise DataError(f"unknown feature {f!r}; model features are {list(names)}")
    fixed = dict(fixed_values or {})
    missing = [n for n in names if n not in (feature_x, feature_y) and n not in fixed]
    if missing:
        raise DataError(f"no fixed value given for {missing}")
    xs, ys = np.asarray(x_values, float), np.asarray(y_values, float)
    XX, YY = np.meshgrid(xs, ys)
    cols = []
    for n in names:
        if n == feature_x:
            cols.append(XX.ravel())
        elif n == feature_y:
            cols.append(YY.ravel())
        else:
            cols.append(np.full(XX.size, float(fixed[n])))
    return model_response(net, np.column_stack(cols)).reshape(XX.shape)


def default_grid_axis(ds: Dataset, feature: str, grid: int) -> np.ndarray:
    v = ds.columns([feature])[:, 0]
    lo, hi = np.quantile(v, [0.005, 0.995])
    return np.geomspace(max(lo, 1e-3), hi, grid)


def grid_monotone(values: np.ndarray, axis: int, tol: float = 1e-9) -> bool:
    """Non-decreasing along ``axis`` on every grid line (up to ``tol``)."""
    return bool(np.all(np.diff(values, axis=axis) >= -tol))


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties count half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if not n_pos or not n_neg:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
