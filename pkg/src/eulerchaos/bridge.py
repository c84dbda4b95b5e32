"""Brownian-bridge structure of the Gaussian prefixes and the line-crossing formula."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .errors import DomainError
from .primes import PrimeTable, block_boundary, boundary_block, sigma_sq
from .randfield import FieldSample, Kind, point_contributions

PATH_CHUNK = 128


@dataclass(frozen=True)
class BridgePath:
    """One realization of ``B_K(x)`` indexed by time ``sigma_R^2(K)``."""

    cutoffs: np.ndarray
    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class BridgeCheckpoint:
    K: float
    time: float
    var_emp: float
    var_theory: float
    cov_with_endpoint: float
    stderr: float


@dataclass(frozen=True)
class BridgeReport:
    R: float
    N: float
    x: float
    n_samples: int
    checkpoints: list[BridgeCheckpoint] = field(default_factory=list)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "time", "var_emp", "var_theory", "cov_with_endpoint", "stderr"])
        for c in self.checkpoints:
            w.writerow([repr(float(c.K)), repr(c.time), repr(c.var_emp), repr(c.var_theory), repr(c.cov_with_endpoint), repr(c.stderr)])


def bridge_cutoffs(table: PrimeTable, R: float, N: float, extra: Sequence[float] = ()) -> np.ndarray:
    """Block boundaries in ``[R, N]`` together with ``R``, ``N`` and any ``extra`` cutoffs."""
    if not R < N:
        raise DomainError(f"need R < N, got R={R}, N={N}")
    if N > table.limit:
        raise DomainError(f"N={N} exceeds table limit {table.limit}")
    boundary_block(R)
    ks = [block_boundary(k) for k in range(0, table.n_cut + 2)]
    pts = {float(R), float(N)} | {K for K in ks if R <= K <= N} | {float(K) for K in extra if R < K < N}
    return np.array(sorted(pts))


def _prefix_at(table: PrimeTable, sample: FieldSample, x: float, cutoffs: np.ndarray) -> np.ndarray:
    if sample.kind is not Kind.GAUSSIAN:
        raise DomainError("bridge decomposition needs Gaussian-kind realizations")
    c = np.concatenate([[0.0], np.cumsum(point_contributions(sample, table, [x])[0])])
    idx = [table.count_upto(K) for K in cutoffs]
    return c[idx]


def _bridge_values(prefix: np.ndarray, times: np.ndarray) -> np.ndarray:
    # prefix columns are G_K at the cutoffs; first column R, last column N
    g_r, g_n = prefix[..., :1], prefix[..., -1:]
    return prefix - g_r - (times / times[-1]) * (g_n - g_r)


def bridge_path(sample: FieldSample, table: PrimeTable, R: float, N: float, x: float, extra=()) -> BridgePath:
    cutoffs = bridge_cutoffs(table, R, N, extra)
    times = np.array([sigma_sq(table, R, K) for K in cutoffs])
    vals = _bridge_values(_prefix_at(table, sample, x, cutoffs), times)
    vals[0] = vals[-1] = 0.0
    return BridgePath(cutoffs, times, vals)


def bridge_decompose(
    samples: Sequence[FieldSample], table: PrimeTable, R: float, N: float, x: float, extra: Sequence[float] = ()
) -> BridgeReport:
    """Empirical variance of ``B_K`` and its covariance with ``G_N - G_R`` at each checkpoint."""
    cutoffs = bridge_cutoffs(table, R, N, extra)
    times = np.array([sigma_sq(table, R, K) for K in cutoffs])
    prefix = np.stack([_prefix_at(table, s, x, cutoffs) for s in samples])
    b = _bridge_values(prefix, times)
    endpoint = prefix[:, -1] - prefix[:, 0]
    n = len(samples)
    rows = []
    for i, K in enumerate(cutoffs):
        bi = b[:, i]
        prod = (bi - bi.mean()) * (endpoint - endpoint.mean())
        cov = float(prod.sum() / (n - 1))
        se = float(prod.std(ddof=1) / math.sqrt(n))
        var_theory = times[i] * (1.0 - times[i] / times[-1])
        rows.append(BridgeCheckpoint(float(K), float(times[i]), float(bi.var(ddof=1)), float(var_theory), cov, se))
    return BridgeReport(float(R), float(N), float(x), n, rows)


def line_crossing_closed_form(l0: float, lT: float, T: float) -> float:
    """Probability that a 0-to-0 bridge on ``[0, T]`` crosses the line from ``l0`` to ``lT``."""
    if l0 <= 0 or lT <= 0:
        raise DomainError(f"line endpoints must be positive, got l0={l0}, lT={lT}")
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    return math.exp(-2.0 * l0 * lT / T)


@dataclass(frozen=True)
class CrossingLevel:
    n_steps: int
    estimate: float
    stderr: float
    corrected: float
    corrected_stderr: float


@dataclass(frozen=True)
class CrossingResult:
    l0: float
    lT: float
    T: float
    n_paths: int
    closed_form: float
    levels: list[CrossingLevel]

    @property
    def final(self) -> CrossingLevel:
        return self.levels[-1]


def line_crossing_prob(
    l0: float,
    lT: float,
    T: float,
    n_paths: int,
    n_steps: int | Sequence[int],
    seed: int = 0,
    correct: bool = True,
) -> CrossingResult:
    """Monte Carlo crossing probability from exactly sampled bridges.

    Paths are sampled once on the finest grid; coarser step counts (which must
    divide the finest) monitor the same paths at a subset of times, so the
    discrete estimates increase monotonically with refinement.  The corrected
    estimate replaces each path's indicator by the exact conditional crossing
    probability of the bridge between consecutive monitoring times.
    """
    closed = line_crossing_closed_form(l0, lT, T)
    levels = sorted({int(n_steps)} if np.isscalar(n_steps) else {int(s) for s in n_steps})
    n_fine = levels[-1]
    if any(n_fine % s for s in levels):
        raise DomainError(f"step counts {levels} must divide {n_fine}")
    dt = T / n_fine
    t = np.arange(1, n_fine + 1) * dt
    line = l0 + (lT - l0) * t / T
    hits = {s: 0 for s in levels}
    surv = {s: [] for s in levels}
    done = chunk = 0
    while done < n_paths:
        m = min(PATH_CHUNK, n_paths - done)
        w = np.cumsum(rng.stream(seed, rng.BRIDGE, chunk).standard_normal((m, n_fine)), axis=1) * math.sqrt(dt)
        gap = line - (w - (t / T) * w[:, -1:])  # line minus bridge
        for s in levels:
            stride = n_fine // s
            g = gap[:, stride - 1 :: stride]
            hits[s] += int(np.count_nonzero((g < 0).any(axis=1)))
            if correct:
                h = stride * dt
                g0 = np.concatenate([np.full((m, 1), l0), g[:, :-1]], axis=1)
                prod = np.clip(g0, 0.0, None) * np.clip(g, 0.0, None)
                expo = -2.0 * prod / h
                logs = np.zeros_like(expo)
                live = expo > -40.0
                with np.errstate(divide="ignore"):
                    logs[live] = np.log1p(-np.exp(expo[live]))
                surv[s].append(np.exp(logs.sum(axis=1)))
        done += m
        chunk += 1
    out = []
    for s in levels:
        p = hits[s] / n_paths
        se = math.sqrt(p * (1.0 - p) / n_paths)
        if correct:
            c = 1.0 - np.concatenate(surv[s])
            cp, cse = float(c.mean()), float(c.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.nan
        else:
            cp = cse = math.nan
        out.append(CrossingLevel(s, p, se, cp, cse))
    return CrossingResult(l0, lT, T, n_paths, closed, out)
