"""Per-realization observables: chaos mass, high-point measure, barrier violations.

Thresholds use ``(alpha / 2) ln ln N`` throughout.  Level-set measures are exact
for the piecewise-linear interpolant of the grid values, so ``W_gt <= W`` holds
cell by cell.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import tails
from .errors import DomainError
from .primes import PrimeTable, block_boundary, boundary_block
from .randfield import GridField, Kind
from .tails import TailEstimate

METHODS = ("mc", "tilted", "saddlepoint", "inversion")


@dataclass(frozen=True)
class Normalizer:
    """``log E exp(alpha X_N(x))`` for one table, kind and alpha."""

    log_value: float
    alpha: float
    kind: Kind
    table_id: tuple[int, int]

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


@dataclass
class ObservableRecord:
    alpha: float
    N: int
    kind: str
    seed: int
    r: int
    W: float
    M: float
    W_gt: float
    max_val: float

    def as_dict(self) -> dict:
        return asdict(self)


def loglog(N: float) -> float:
    if N <= math.e:
        raise DomainError(f"ln ln N must be positive, got N={N}")
    return math.log(math.log(N))


def chaos_normalizer(table: PrimeTable, alpha: float, kind=Kind.PHASE) -> Normalizer:
    """Phase kind: ``sum_p log I0(alpha / sqrt(p))``; Gaussian kind: ``alpha**2 / 2 * sum_p 1/(2p)``."""
    kind = Kind.parse(kind)
    if alpha < 0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return Normalizer(0.0, 0.0, kind, table.identity)
    p = table.primes.astype(float)
    if kind is Kind.PHASE:
        log_z = tails.cgf(1.0 / np.sqrt(p), alpha)
    else:
        log_z = 0.5 * alpha * alpha * 0.5 * math.fsum(1.0 / p)
    return Normalizer(log_z, float(alpha), kind, table.identity)


def _trapezoid_weights(n_points: int) -> np.ndarray:
    g = n_points - 1
    w = np.full(n_points, 1.0 / g)
    w[0] = w[-1] = 0.5 / g
    return w


def chaos_mass_values(values: np.ndarray, alpha: float, log_z: float) -> np.ndarray:
    """Trapezoid rule of ``exp(alpha v - log_z)`` over the last axis."""
    values = np.asarray(values, dtype=float)
    if alpha == 0 and log_z == 0:
        return np.ones(values.shape[:-1]) if values.ndim > 1 else np.float64(1.0)
    return np.exp(alpha * values - log_z) @ _trapezoid_weights(values.shape[-1])


def chaos_mass(fld: GridField, alpha: float, normalizer: Normalizer) -> float:
    if normalizer.table_id != fld.table_id or normalizer.kind is not fld.kind:
        raise DomainError(
            f"normalizer built for {normalizer.kind.value} table {normalizer.table_id}, "
            f"field is {fld.kind.value} table {fld.table_id}"
        )
    if normalizer.alpha != alpha:
        raise DomainError(f"normalizer alpha {normalizer.alpha} != {alpha}")
    return float(chaos_mass_values(fld.totals, alpha, normalizer.log_value))


def _above_intervals(values: np.ndarray, level) -> tuple[np.ndarray, np.ndarray]:
    """Per grid cell, the sub-interval ``[lo, hi]`` (cell-local units) where the
    linear interpolant exceeds ``level``.  Empty cells give ``lo == hi``."""
    f0, f1 = values[..., :-1], values[..., 1:]
    level = np.asarray(level, dtype=float)
    if level.ndim:
        level = level[..., None]
    a0, a1 = f0 > level, f1 > level
    with np.errstate(divide="ignore", invalid="ignore"):
        frac0 = np.where(a0 & ~a1, (f0 - level) / (f0 - f1), 0.0)
        frac1 = np.where(a1 & ~a0, (f1 - level) / (f1 - f0), 0.0)
    lo = np.where(a0, 0.0, np.where(a1, 1.0 - frac1, 0.0))
    hi = np.where(a0 & a1, 1.0, np.where(a0, frac0, np.where(a1, 1.0, 0.0)))
    return lo, hi


def level_set_measure(values: np.ndarray, level) -> np.ndarray:
    """Lebesgue measure of ``{x : interpolant(x) > level}`` on ``[0, 1]`` (last axis = grid)."""
    lo, hi = _above_intervals(np.asarray(values, dtype=float), level)
    return (hi - lo).sum(axis=-1) / (values.shape[-1] - 1)


def high_points(fld: GridField, alpha: float) -> float:
    return float(level_set_measure(fld.totals, 0.5 * alpha * loglog(fld.limit)))


def _overlap(lo1, hi1, lo2, hi2):
    return np.clip(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0, None)


def barrier_checkpoints(limit: int, n_cut: int, R: float) -> list[tuple[int, float]]:
    """``(prefix_block, level)`` pairs: block boundaries ``N_k`` in ``[R, N]`` plus ``N`` itself."""
    n = loglog(limit)
    if R > limit:
        raise DomainError(f"need R <= N, got R={R}, N={limit}")
    points = []
    if R < limit:
        r = boundary_block(R)
        points = [(k, float(k)) for k in range(r, n_cut + 1) if block_boundary(k) <= limit]
    points.append((n_cut, n))
    return points


def barrier_violation_values(block_values: np.ndarray, limit: int, alpha: float, eps: float, R: float) -> np.ndarray:
    """Batch form of :func:`barrier_violation`; ``block_values`` is ``(..., n_blocks, G+1)``."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    block_values = np.asarray(block_values, dtype=float)
    n_cut = block_values.shape[-2] - 1
    prefixes = np.cumsum(block_values, axis=-2)
    total = prefixes[..., n_cut, :]
    n = loglog(limit)
    h_lo, h_hi = _above_intervals(total, 0.5 * alpha * n)
    left = np.zeros_like(h_lo)
    right = np.zeros_like(h_lo)
    if math.isfinite(eps):
        for k, level in barrier_checkpoints(limit, n_cut, R):
            lo, hi = _above_intervals(prefixes[..., k, :], 0.5 * (alpha + eps) * level)
            nonempty = hi > lo
            left = np.maximum(left, np.where(nonempty & (lo == 0.0), hi, 0.0))
            right = np.maximum(right, np.where(nonempty & (hi == 1.0), 1.0 - lo, 0.0))
    r_lo = 1.0 - right
    meas = (
        _overlap(h_lo, h_hi, 0.0, left)
        + _overlap(h_lo, h_hi, r_lo, 1.0)
        - _overlap(h_lo, h_hi, r_lo, left)
    )
    return meas.sum(axis=-1) / (total.shape[-1] - 1)


def barrier_violation(fld: GridField, alpha: float, eps: float, R: float) -> float:
    """Measure of points that are high at ``N`` and cross the line ``(alpha+eps)/2 * ln ln K``
    at some checkpoint ``K`` in ``[R, N]`` (block boundaries and ``N``)."""
    return float(barrier_violation_values(fld.block_values, fld.limit, alpha, eps, R))


def expected_W(
    table: PrimeTable,
    alpha: float,
    method: str = "tilted",
    *,
    kind=Kind.PHASE,
    N: int | None = None,
    n_samples: int = 20000,
    seed: int = 0,
    head_limit: int | None = 1000,
) -> TailEstimate:
    """``E W_{alpha,N} = P(X_N(0) > (alpha/2) ln ln N)``.

    Methods for the phase kind: ``mc`` (plain Monte Carlo), ``tilted`` (Esscher
    importance sampling; primes above ``head_limit`` are integrated out exactly),
    ``saddlepoint`` (Lugannani-Rice) and ``inversion`` (characteristic function).
    The Gaussian kind has the closed form normal tail for every method.
    """
    kind = Kind.parse(kind)
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    if not 0 <= alpha < 2:
        raise DomainError(f"alpha must lie in [0, 2), got {alpha}")
    N = table.limit if N is None else int(N)
    t = 0.5 * alpha * loglog(N)
    p = table.primes[: table.count_upto(N)].astype(float)
    if kind is Kind.GAUSSIAN:
        from scipy.stats import norm

        sd = math.sqrt(0.5 * math.fsum(1.0 / p))
        return TailEstimate(float(norm.sf(t / sd)), 0.0, "exact", t)
    if t == 0:
        return TailEstimate(0.5, 0.0, method, t)
    a = 1.0 / np.sqrt(p)
    if method == "mc":
        return tails.tail_mc(a, t, n_samples, seed)
    if method == "tilted":
        head = None if head_limit is None else int(np.searchsorted(p, head_limit, side="right"))
        return tails.tail_tilted(a, t, n_samples, seed, head=head)
    if method == "saddlepoint":
        est = tails.tail_saddlepoint(a, t)
        if est.fallback:
            mc = tails.tail_mc(a, t, n_samples, seed)
            return TailEstimate(mc.value, mc.stderr, "saddlepoint", t, n_samples, fallback=True)
        return est
    return tails.tail_inversion(a, t)


def observe(
    fld: GridField,
    alphas,
    normalizers: dict,
    R_values=(),
    eps: float = 0.5,
) -> dict:
    """All observables of one field for several alphas.

    Returns ``{alpha: {"W", "M", "max_val", "W_gt": [one per R]}}``.
    """
    totals = fld.totals
    n = loglog(fld.limit)
    out = {}
    for alpha in alphas:
        norm = normalizers[alpha]
        out[alpha] = {
            "W": float(level_set_measure(totals, 0.5 * alpha * n)),
            "M": float(chaos_mass_values(totals, alpha, norm.log_value)),
            "max_val": float(totals.max()),
            "W_gt": [float(barrier_violation_values(fld.block_values, fld.limit, alpha, eps, R)) for R in R_values],
        }
    return out
