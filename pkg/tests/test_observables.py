import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eulerchaos.errors import DomainError
from eulerchaos.observables import (
    barrier_checkpoints,
    barrier_violation,
    barrier_violation_values,
    chaos_mass,
    chaos_mass_values,
    chaos_normalizer,
    expected_W,
    high_points,
    level_set_measure,
    loglog,
    observe,
)
from eulerchaos.primes import block_boundary, sieve
from eulerchaos.randfield import GridField, Kind, evaluate, evaluate_many, min_grid_size, sample

from conftest import single_prime_table


def _synthetic(values, limit=10**5, n_blocks=1):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    G = values.shape[-1] - 1
    return GridField(np.arange(G + 1) / G, values, Kind.PHASE, limit, (limit, 0))


def test_normalizer_zero_and_negative(table_1e3):
    assert chaos_normalizer(table_1e3, 0.0).log_value == 0.0
    assert chaos_normalizer(table_1e3, 0.0).value == 1.0
    with pytest.raises(DomainError):
        chaos_normalizer(table_1e3, -0.1)


def test_normalizer_single_prime(frozen):
    t = single_prime_table(2)
    z = chaos_normalizer(t, 1.0, Kind.PHASE).value
    assert z == pytest.approx(frozen["mgf_cos_a"], abs=1e-10)
    for a in (0.5, 1.5):
        assert chaos_normalizer(t, a, Kind.GAUSSIAN).log_value == pytest.approx(a * a / (4 * 2), abs=1e-15)


def test_chaos_mass_trivial():
    f = _synthetic(np.full(101, 0.7))
    norm = chaos_normalizer(single_prime_table(2), 0.0)
    assert chaos_mass_values(f.totals, 0.0, 0.0) == 1.0
    assert chaos_mass_values(f.totals, 1.3, 0.2) == pytest.approx(math.exp(1.3 * 0.7 - 0.2), rel=1e-14)
    assert norm.log_value == 0.0


def test_chaos_mass_identity_checks(table_1e3):
    f = evaluate(sample(Kind.PHASE, table_1e3, 0), table_1e3, 70)
    with pytest.raises(DomainError):
        chaos_mass(f, 1.0, chaos_normalizer(sieve(100), 1.0))
    with pytest.raises(DomainError):
        chaos_mass(f, 1.0, chaos_normalizer(table_1e3, 1.0, Kind.GAUSSIAN))
    with pytest.raises(DomainError):
        chaos_mass(f, 0.5, chaos_normalizer(table_1e3, 1.0))
    assert chaos_mass(f, 1.0, chaos_normalizer(table_1e3, 1.0)) > 0


def test_level_set_synthetic():
    x = np.linspace(0, 1, 1001)
    assert level_set_measure(np.sin(2 * np.pi * x), 0.0) == pytest.approx(0.5, abs=1e-12)
    assert level_set_measure(x, 0.25) == pytest.approx(0.75, abs=1e-12)
    assert level_set_measure(np.sin(2 * np.pi * x), 2.0) == 0.0


def test_high_points_alpha_zero():
    x = np.linspace(0, 1, 201)
    f = _synthetic(np.cos(3 * np.pi * x))
    assert high_points(f, 0.0) == pytest.approx(level_set_measure(f.totals, 0.0))
    assert high_points(f, 0.0) == pytest.approx(0.5, abs=1e-3)  # [0, 1/6) and (1/2, 5/6)


def test_loglog_guard():
    with pytest.raises(DomainError):
        loglog(2.0)
    assert loglog(16) > 1


def test_checkpoints():
    assert barrier_checkpoints(10**5, 3, block_boundary(1)) == [(1, 1.0), (2, 2.0), (3, loglog(10**5))]
    assert barrier_checkpoints(10**5, 3, 10**5) == [(3, loglog(10**5))]
    with pytest.raises(DomainError):
        barrier_checkpoints(10**5, 3, block_boundary(3))


@pytest.fixture(scope="module")
def fields_1e5(table_1e5):
    return evaluate_many(Kind.PHASE, table_1e5, 3, range(60), min_grid_size(10**5))


def test_barrier_properties(fields_1e5):
    R1, R2 = block_boundary(1), block_boundary(2)
    for f in fields_1e5:
        for a in (0.5, 1.0, 1.5):
            W = high_points(f, a)
            g1 = barrier_violation(f, a, 0.5, R1)
            g2 = barrier_violation(f, a, 0.5, R2)
            assert 0 <= g2 <= g1 + 1e-15 <= W + 1e-15
            assert barrier_violation(f, a, 0.25, R1) >= barrier_violation(f, a, 1.0, R1) - 1e-15
            assert barrier_violation(f, a, math.inf, R1) == 0.0
            assert barrier_violation(f, a, 1e6, R1) == 0.0
            top = barrier_violation(f, a, 0.5, f.limit)
            n = loglog(f.limit)
            assert top == pytest.approx(level_set_measure(f.totals, 0.5 * (a + 0.5) * n), abs=1e-12)
            assert top <= W + 1e-15


def test_barrier_eps_validation(fields_1e5):
    with pytest.raises(DomainError):
        barrier_violation(fields_1e5[0], 1.0, 0.0, block_boundary(1))
    with pytest.raises(DomainError):
        barrier_violation(fields_1e5[0], 1.0, 0.5, 100.0)


def test_barrier_batch_matches_single(fields_1e5):
    stack = np.stack([f.block_values for f in fields_1e5])
    batch = barrier_violation_values(stack, 10**5, 1.0, 0.5, block_boundary(1))
    single = [barrier_violation(f, 1.0, 0.5, block_boundary(1)) for f in fields_1e5]
    assert np.allclose(batch, single, atol=0, rtol=0)


def test_barrier_brute_force(fields_1e5):
    # dense resampling of the interpolants as an independent check
    f = max(fields_1e5, key=lambda f: f.totals.max())
    a, eps, R = 0.5, 0.25, block_boundary(1)
    fine = np.linspace(0, 1, 200001)
    pre = np.cumsum(f.block_values, axis=0)
    interp = np.array([np.interp(fine, f.grid, row) for row in pre])
    n = loglog(f.limit)
    high = interp[-1] > 0.5 * a * n
    hit = np.zeros_like(high)
    for k, level in barrier_checkpoints(f.limit, f.n_cut, R):
        hit |= interp[k] > 0.5 * (a + eps) * level
    # the stored measure uses left/right-anchored crossing sets, which contain this pointwise set
    brute = np.mean(high & hit)
    exact = barrier_violation(f, a, eps, R)
    assert exact >= brute - 1e-4


def test_W_monotone_in_alpha(fields_1e5):
    for f in fields_1e5:
        ws = [high_points(f, a) for a in (0.0, 0.5, 1.0, 1.5, 1.9)]
        assert all(x >= y for x, y in zip(ws, ws[1:]))


def test_observe_and_alpha_zero(fields_1e5, table_1e5):
    norms = {a: chaos_normalizer(table_1e5, a) for a in (0.0, 1.0)}
    for f in fields_1e5[:10]:
        o = observe(f, [0.0, 1.0], norms, [block_boundary(1)], 0.5)
        assert o[0.0]["M"] == 1.0
        assert o[0.0]["W"] == pytest.approx(level_set_measure(f.totals, 0.0))
        assert o[1.0]["M"] >= 0 and o[1.0]["max_val"] == f.totals.max()
        assert o[1.0]["W_gt"][0] <= o[1.0]["W"]
        assert o[1.0]["max_val"] >= f.totals[0] and o[1.0]["max_val"] >= f.totals.mean()


def test_expected_W_limits(table_1e3):
    assert expected_W(table_1e3, 0.0).value == 0.5
    g = expected_W(table_1e3, 1.0, kind=Kind.GAUSSIAN)
    assert g.method == "exact" and 0 < g.value < 0.5
    with pytest.raises(DomainError):
        expected_W(table_1e3, 1.0, "bogus")
    with pytest.raises(DomainError):
        expected_W(table_1e3, 2.5)


def test_expected_W_methods_agree(table_1e3, frozen):
    ref = frozen["tail_1e3_alpha1"]
    inv = expected_W(table_1e3, 1.0, "inversion")
    assert inv.value == pytest.approx(ref, abs=1e-8)
    sp = expected_W(table_1e3, 1.0, "saddlepoint")
    assert sp.value == pytest.approx(ref, rel=0.02)
    for method, n in (("mc", 200000), ("tilted", 20000)):
        est = expected_W(table_1e3, 1.0, method, n_samples=n, seed=4)
        assert abs(est.value - ref) < 4 * est.stderr


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=40), st.floats(-2, 2))
def test_level_set_bounds(vals, level):
    v = np.array(vals)
    m = level_set_measure(v, level)
    assert 0.0 <= m <= 1.0 + 1e-12
    if v.min() > level:
        assert m == pytest.approx(1.0)
    if v.max() <= level:
        assert m == 0.0
