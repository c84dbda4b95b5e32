import io
import math

import numpy as np
import pytest

from eulerchaos.bridge import (
    bridge_cutoffs,
    bridge_decompose,
    bridge_path,
    line_crossing_closed_form,
    line_crossing_prob,
)
from eulerchaos.errors import DomainError
from eulerchaos.primes import block_boundary, sigma_sq
from eulerchaos.randfield import Kind, sample


def test_closed_form(frozen):
    assert line_crossing_closed_form(1, 1, 1) == pytest.approx(frozen["exp_minus_2"], abs=1e-15)
    assert line_crossing_closed_form(50, 1, 1) < 1e-40
    with pytest.raises(DomainError):
        line_crossing_closed_form(0, 1, 1)
    with pytest.raises(DomainError):
        line_crossing_closed_form(1, -1, 1)


def test_path_pinned(table_1e5):
    R = block_boundary(1)
    p = bridge_path(sample(Kind.GAUSSIAN, table_1e5, 0), table_1e5, R, 10**5, 0.3, extra=[100, 5000])
    assert p.values[0] == 0.0 and p.values[-1] == 0.0
    assert np.all(np.diff(p.times) > 0) and p.times[-1] == pytest.approx(sigma_sq(table_1e5, R, 10**5))
    assert list(p.cutoffs) == [R, 100.0, block_boundary(2), 5000.0, 10**5]


def test_cutoff_errors(table_1e5):
    with pytest.raises(DomainError):
        bridge_cutoffs(table_1e5, 100, 100)
    with pytest.raises(DomainError):
        bridge_cutoffs(table_1e5, 10, 10**6)


def test_phase_rejected(table_1e5):
    with pytest.raises(DomainError):
        bridge_path(sample(Kind.PHASE, table_1e5, 0), table_1e5, block_boundary(1), 10**5, 0.0)


def test_decompose_profile(table_1e5):
    samples = [sample(Kind.GAUSSIAN, table_1e5, 3, r) for r in range(4000)]
    rep = bridge_decompose(samples, table_1e5, block_boundary(1), 10**5, 0.25, extra=[60, 400, 10000])
    first, last = rep.checkpoints[0], rep.checkpoints[-1]
    assert first.var_emp == 0 and last.var_emp == 0 and first.cov_with_endpoint == 0
    for c in rep.checkpoints[1:-1]:
        assert abs(c.cov_with_endpoint) < 4 * c.stderr
        # Var of a sample variance of a normal: 2 sigma^4 / (n - 1)
        assert abs(c.var_emp - c.var_theory) < 4 * c.var_theory * math.sqrt(2 / (rep.n_samples - 1))
    buf = io.StringIO()
    rep.write_csv(buf)
    assert buf.getvalue().splitlines()[0] == "K,time,var_emp,var_theory,cov_with_endpoint,stderr"


def test_crossing_refinement_monotone():
    res = line_crossing_prob(1, 1, 1, 3000, [2**6, 2**8, 2**10], seed=1)
    est = [lv.estimate for lv in res.levels]
    assert est == sorted(est) and est[-1] <= res.closed_form + 3 * res.final.stderr
    assert abs(res.final.corrected - res.closed_form) < 4 * res.final.corrected_stderr
    with pytest.raises(DomainError):
        line_crossing_prob(1, 1, 1, 10, [3, 8])


def test_crossing_monotone_in_parameters():
    vals = {}
    for l0 in (0.5, 1.0, 1.5):
        for lT in (0.5, 1.0, 1.5):
            for T in (0.5, 1.0, 2.0):
                vals[l0, lT, T] = line_crossing_prob(l0, lT, T, 2000, 256, seed=5).final.corrected
    grid = (0.5, 1.0, 1.5)
    for a in grid:
        for T in (0.5, 1.0, 2.0):
            assert vals[0.5, a, T] >= vals[1.0, a, T] >= vals[1.5, a, T]
            assert vals[a, 0.5, T] >= vals[a, 1.0, T] >= vals[a, 1.5, T]
        for b in grid:
            assert vals[a, b, 0.5] <= vals[a, b, 1.0] <= vals[a, b, 2.0]
    # the closed form obeys the same ordering
    assert line_crossing_closed_form(0.5, 1, 1) > line_crossing_closed_form(1, 1, 1)


def test_crossing_deterministic():
    a = line_crossing_prob(1, 1, 1, 500, 128, seed=3)
    b = line_crossing_prob(1, 1, 1, 500, 128, seed=3)
    assert a == b
