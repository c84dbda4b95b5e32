"""Block increments, branching points and their covariance structure."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .primes import PrimeTable, block_reciprocal_sums
from .randfield import FieldSample, evaluate_points
from .stats import correlation, covariance, jackknife


class Regime(str, enum.Enum):
    BEFORE = "before"
    AFTER = "after"


def branching_point(x: float, x2: float) -> int:
    """``floor(ln 1/|x - x2|)``, the scale where the two points decouple."""
    d = abs(x - x2)
    if d == 0:
        raise DomainError("branching point of identical points is infinite")
    # tolerance absorbs rounding of exp/log round trips such as d = e**-3
    return math.floor(-math.log(d) + 1e-9)


def rho_exact(table: PrimeTable, k: int, delta: float) -> float:
    """``sum_{p in block k} cos(delta ln p) / (2p)``."""
    sl = table.block_slice(k)
    p = table.primes[sl].astype(float)
    return 0.5 * math.fsum(np.cos(abs(delta) * table.log_p[sl]) / p)


def block_variances(table: PrimeTable) -> np.ndarray:
    """``Var Y_k`` for every block of the table (``rho_exact`` at ``delta = 0``)."""
    return 0.5 * block_reciprocal_sums(table)


@dataclass(frozen=True)
class CovarianceReport:
    k: int
    x: float
    x2: float
    rho_exact: float
    rho_empirical: float
    stderr: float
    regime: Regime

    @property
    def delta(self) -> float:
        return abs(self.x - self.x2)


def sample_block_values(samples: Iterable[FieldSample], table: PrimeTable, xs: Sequence[float]) -> np.ndarray:
    """Block values at ``xs`` for each realization, shape ``(n_samples, n_blocks, len(xs))``."""
    return np.stack([evaluate_points(s, table, xs) for s in samples])


def covariance_report(
    samples: Sequence[FieldSample] | np.ndarray,
    table: PrimeTable,
    x: float,
    x2: float,
    blocks: Sequence[int] | None = None,
) -> list[CovarianceReport]:
    """Exact and empirical ``E[Y_k(x) Y_k(x2)]`` per block, empirical with a jackknife error.

    ``samples`` may be realizations or a precomputed ``(n, n_blocks, 2)`` array.
    """
    vals = samples if isinstance(samples, np.ndarray) else sample_block_values(samples, table, [x, x2])
    delta = abs(x - x2)
    branch = branching_point(x, x2) if delta > 0 else math.inf
    out = []
    for k in range(table.n_cut + 1) if blocks is None else blocks:
        emp, se = jackknife(covariance, vals[:, k, 0], vals[:, k, 1])
        regime = Regime.BEFORE if k <= branch else Regime.AFTER
        out.append(CovarianceReport(k, x, x2, rho_exact(table, k, delta), emp, se, regime))
    return out


def write_covariance_csv(reports: Sequence[CovarianceReport], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "delta", "regime", "rho_exact", "rho_emp", "stderr"])
    for r in reports:
        w.writerow([r.k, repr(r.delta), r.regime.value, repr(r.rho_exact), repr(r.rho_empirical), repr(r.stderr)])


@dataclass(frozen=True)
class DecouplingPart:
    m: int
    blocks: tuple[int, ...]
    correlation: float
    stderr: float


@dataclass(frozen=True)
class DecouplingReport:
    branch: float
    delta: int
    after: DecouplingPart | None
    before: DecouplingPart | None


def decoupling_report(
    samples: Sequence[FieldSample] | np.ndarray,
    table: PrimeTable,
    x: float,
    x2: float,
    delta: int = 2,
) -> DecouplingReport:
    """Correlation of block sums beyond ``branch + delta`` and up to ``branch - delta``.

    A part is ``None`` when the table has no blocks on that side; if both sides are
    empty the request is rejected.
    """
    vals = samples if isinstance(samples, np.ndarray) else sample_block_values(samples, table, [x, x2])
    n_cut = table.n_cut
    branch = math.inf if x == x2 else branching_point(x, x2)
    after = before = None
    if math.isfinite(branch) and branch + delta < n_cut:
        m = int(branch + delta)
        ks = tuple(range(m + 1, n_cut + 1))
        a, b = vals[:, list(ks), 0].sum(axis=1), vals[:, list(ks), 1].sum(axis=1)
        after = DecouplingPart(m, ks, *jackknife(correlation, a, b))
    m_before = n_cut if not math.isfinite(branch) else int(branch - delta)
    if m_before >= 0:
        m_before = min(m_before, n_cut)
        ks = tuple(range(0, m_before + 1))
        a, b = vals[:, list(ks), 0].sum(axis=1), vals[:, list(ks), 1].sum(axis=1)
        before = DecouplingPart(m_before, ks, *jackknife(correlation, a, b))
    if after is None and before is None:
        raise DomainError(f"insufficient blocks (n_cut={n_cut}) for delta={delta} at branch {branch}")
    return DecouplingReport(branch, delta, after, before)
