import math

import numpy as np
import pytest
from scipy import special

from eulerchaos import _bessel, tails
from eulerchaos.observables import expected_W
from eulerchaos.primes import sieve


@pytest.mark.parametrize("z", ["0.1", "0.7071067811865476", "1.5", "3.75", "10.0", "40.0"])
def test_i0_against_oracle(z, frozen):
    assert float(_bessel.i0(float(z))) == pytest.approx(frozen["i0_values"][z], rel=1e-13)


def test_bessel_against_scipy():
    z = np.concatenate([np.linspace(0, 29.9, 300), np.linspace(30, 200, 50)])
    assert np.allclose(_bessel.i0(z), special.i0(z), rtol=1e-13, atol=0)
    assert np.allclose(_bessel.log_i0(z), np.log(special.i0e(z)) + z, rtol=1e-13, atol=1e-300)
    assert np.allclose(_bessel.bessel_ratio(z[1:]), special.i1e(z[1:]) / special.i0e(z[1:]), rtol=1e-12)
    assert _bessel.i1_over_z(np.array([0.0]))[0] == 0.5
    assert _bessel.i0m1(np.array([1e-10]))[0] == pytest.approx(2.5e-21, rel=1e-12)


def test_cgf_derivatives_at_zero(table_1e3):
    a = 1 / np.sqrt(table_1e3.primes.astype(float))
    assert tails.cgf(a, 0.0) == 0.0
    assert tails.cgf_d1(a, 0.0) == 0.0
    assert tails.cgf_d2(a, 0.0) == pytest.approx(math.fsum(0.5 * a * a), rel=1e-14)


def test_cgf_derivatives_numerically(table_1e3):
    a = 1 / np.sqrt(table_1e3.primes.astype(float))
    h = 1e-5
    for lam in (0.3, 1.0, 2.5):
        d1 = (tails.cgf(a, lam + h) - tails.cgf(a, lam - h)) / (2 * h)
        d2 = (tails.cgf_d1(a, lam + h) - tails.cgf_d1(a, lam - h)) / (2 * h)
        assert tails.cgf_d1(a, lam) == pytest.approx(d1, rel=1e-7)
        assert tails.cgf_d2(a, lam) == pytest.approx(d2, rel=1e-7)


def test_solve_tilt(table_1e3):
    a = 1 / np.sqrt(table_1e3.primes.astype(float))
    lam = tails.solve_tilt(a, 1.0)
    assert tails.cgf_d1(a, lam) == pytest.approx(1.0, abs=1e-12)
    assert tails.solve_tilt(a, 0.0) == 0.0
    with pytest.raises(ValueError):
        tails.solve_tilt(a, a.sum() + 1)


def test_inversion_small_exact():
    # single term: P(a cos U > y) = arccos(y / a) / pi; J0 decays slowly, so truncation is flagged
    a = np.array([0.8])
    y = np.array([-0.5, 0.0, 0.3, 0.7])
    with pytest.warns(RuntimeWarning, match="truncated"):
        got = tails.tail_by_inversion(a, y)
    assert np.allclose(got, np.arccos(y / 0.8) / np.pi, atol=1e-3)


def test_inversion_two_terms_against_mc():
    a = np.array([1.0, 0.5, 0.3])
    mc = tails.tail_mc(a, 0.4, 400000, seed=2)
    inv = tails.tail_inversion(a, 0.4)
    assert abs(inv.value - mc.value) < 4 * mc.stderr


def test_tilted_fallback_flag():
    a = np.array([0.5, 0.5])
    with pytest.warns(RuntimeWarning):
        est = tails.tail_tilted(a, 5.0, 1000, seed=0)
    assert est.fallback and est.value == 0.0


def test_saddlepoint_failure_flag():
    est = tails.tail_saddlepoint(np.array([0.5]), 1.0)
    assert est.fallback and math.isnan(est.value)


def test_tilted_exact_contributions_without_head(table_1e3):
    a = 1 / np.sqrt(table_1e3.primes.astype(float))
    full = tails.tail_tilted(a, 1.5, 20000, seed=3)
    headed = tails.tail_tilted(a, 1.5, 20000, seed=3, head=40)
    ref = tails.tail_inversion(a, 1.5).value
    assert abs(full.value - ref) < 4 * full.stderr
    assert abs(headed.value - ref) < 4 * headed.stderr
    assert headed.stderr < full.stderr


def test_mc_deterministic(table_1e3):
    a = 1 / np.sqrt(table_1e3.primes.astype(float))
    assert tails.tail_mc(a, 1.0, 5000, 9) == tails.tail_mc(a, 1.0, 5000, 9)


@pytest.mark.slow
def test_tilted_vs_mc_at_1e5():
    t = sieve(10**5)
    mc = expected_W(t, 1.0, "mc", n_samples=100000, seed=17)
    tilt = expected_W(t, 1.0, "tilted", n_samples=20000, seed=18)
    assert abs(mc.value - tilt.value) < 3 * math.hypot(mc.stderr, tilt.stderr)
