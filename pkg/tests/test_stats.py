import math

import numpy as np
import pytest

from eulerchaos.stats import correlation, covariance, jackknife, wilson


def test_jackknife_mean_matches_classical():
    x = np.random.default_rng(0).normal(size=1000)
    est, se = jackknife(np.mean, x, groups=1000)
    assert est == pytest.approx(x.mean())
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(len(x)), rel=1e-10)


def test_jackknife_degenerate():
    est, se = jackknife(np.mean, np.array([1.0]))
    assert est == 1.0 and math.isnan(se)


def test_covariance_correlation():
    x = np.arange(10.0)
    assert covariance(x, 2 * x) == pytest.approx(2 * np.var(x, ddof=1))
    assert correlation(x, -x) == pytest.approx(-1.0)
    assert correlation(np.ones(5), np.ones(5)) == 1.0
    assert math.isnan(correlation(np.ones(5), x[:5]))


def test_wilson():
    p, lo, hi = wilson(0, 100)
    assert p == 0 and lo == 0 and 0 < hi < 0.05
    p, lo, hi = wilson(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)
    assert wilson(0, 0)[1:] == (0.0, 1.0)
