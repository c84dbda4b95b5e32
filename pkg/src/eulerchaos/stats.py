"""Small statistical helpers shared by the reports."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


def jackknife(estimator, *columns: np.ndarray, groups: int = 50) -> tuple[float, float]:
    """Point estimate and delete-a-group jackknife standard error.

    ``estimator`` maps the column arrays to a scalar; rows are split into
    ``groups`` contiguous groups (fewer if there are fewer rows).
    """
    n = len(columns[0])
    est = float(estimator(*columns))
    g = min(groups, n)
    if g < 2:
        return est, math.nan
    edges = np.linspace(0, n, g + 1).astype(int)
    keep = np.ones(n, dtype=bool)
    loo = np.empty(g)
    for i in range(g):
        keep[edges[i] : edges[i + 1]] = False
        loo[i] = estimator(*(c[keep] for c in columns))
        keep[edges[i] : edges[i + 1]] = True
    se = math.sqrt((g - 1) / g * float(np.sum((loo - loo.mean()) ** 2)))
    return est, se


def covariance(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.cov(x, y, ddof=1)[0, 1])


def correlation(x: np.ndarray, y: np.ndarray) -> float:
    sx, sy = np.std(x), np.std(y)
    if sx == 0 or sy == 0:
        return 1.0 if np.allclose(x, y) else math.nan
    return float(np.corrcoef(x, y)[0, 1])


def wilson(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float, float]:
    """Proportion with its Wilson score interval ``(p, lo, hi)``."""
    if trials == 0:
        return math.nan, 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return successes / trials, float(ci.low), float(ci.high)
