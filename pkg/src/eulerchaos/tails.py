"""Tail probability of the phase field at a single point.

By stationarity the expected high-point measure is ``P(S > t)`` with
``S = sum_p p**-0.5 cos(U_p)``, ``U_p`` uniform.  The cumulant generating
function of ``S`` is ``K(lam) = sum_p log I0(lam / sqrt(p))``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from . import rng
from ._bessel import bessel_ratio, i0m1, i1_over_z, log_i0

_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class TailEstimate:
    value: float
    stderr: float
    method: str
    threshold: float
    n_samples: int = 0
    tilt: float = 0.0
    fallback: bool = False


def cgf(a: np.ndarray, lam: float) -> float:
    return math.fsum(log_i0(lam * a))


def cgf_d1(a: np.ndarray, lam: float) -> float:
    return math.fsum(a * bessel_ratio(lam * a))


def cgf_d2(a: np.ndarray, lam: float) -> float:
    z = lam * a
    ratio_over_z = i1_over_z(z) / (1.0 + i0m1(z))
    ratio = z * ratio_over_z
    return math.fsum(a * a * (1.0 - ratio_over_z - ratio * ratio))


def solve_tilt(a: np.ndarray, t: float) -> float:
    """Solve ``K'(lam) = t`` for ``lam >= 0``; raises ``ValueError`` if no bracket exists."""
    if t <= 0:
        return 0.0
    if t >= a.sum():
        raise ValueError(f"threshold {t} exceeds the support bound {a.sum()}")
    hi = max(1.0, 2.0 * t / max(cgf_d2(a, 0.0), 1e-300))
    for _ in range(60):
        if cgf_d1(a, hi) > t:
            break
        hi *= 2.0
    else:
        raise ValueError("could not bracket the saddle point")
    return optimize.brentq(lambda lam: cgf_d1(a, lam) - t, 0.0, hi, xtol=1e-14, rtol=1e-14)


def _char_fn(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    # prod_j J0(u a_j), accumulated as log-modulus and sign
    logmod = np.zeros(len(u))
    neg = np.zeros(len(u), dtype=bool)
    step = max(1, _CHUNK_ELEMS // max(len(u), 1))
    for lo in range(0, len(a), step):
        j = special.j0(np.outer(u, a[lo : lo + step]))
        with np.errstate(divide="ignore"):
            logmod += np.log(np.abs(j)).sum(axis=1)
        neg ^= (np.count_nonzero(j < 0, axis=1) % 2).astype(bool)
    out = np.exp(logmod)
    out[neg] *= -1.0
    return out


def tail_by_inversion(a: np.ndarray, y) -> np.ndarray:
    """``P(sum_j a_j cos U_j > y)`` by Gil-Pelaez inversion with the midpoint rule.

    The midpoint sum is exact up to mass at distance ``> 2 pi / h`` from ``y``; ``h``
    is chosen so that this mass is below ``exp(-40)`` (sub-Gaussian bound).
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    if len(a) == 0:
        return (y < 0).astype(float)
    sigma = math.sqrt(0.5 * float(np.sum(a * a)))
    reach = min(float(a.sum()), 13.0 * sigma)
    h = 2.0 * math.pi / (float(np.max(np.abs(y), initial=0.0)) + reach + 1e-12) * 0.999
    # truncation: extend until the characteristic function is negligible
    u_max = 9.0 / sigma
    for _ in range(40):
        probe = np.linspace(u_max, 1.25 * u_max, 8)
        if np.max(np.abs(_char_fn(a, probe)) / probe) < 1e-18:
            break
        u_max *= 1.5
    else:
        warnings.warn("characteristic function decays slowly; inversion truncated", RuntimeWarning)
    m = int(math.ceil(u_max / h))
    u = (np.arange(m) + 0.5) * h
    weight = _char_fn(a, u) * h / u
    out = np.empty(y.shape)
    flat_y, flat_out = y.ravel(), out.ravel()
    step = max(1, _CHUNK_ELEMS // m)
    for lo in range(0, len(flat_y), step):
        block = flat_y[lo : lo + step]
        flat_out[lo : lo + step] = 0.5 - (np.sin(np.outer(block, u)) @ weight) / math.pi
    return np.clip(out, 0.0, 1.0)


def tail_mc(a: np.ndarray, t: float, n_samples: int, seed: int) -> TailEstimate:
    """Plain Monte Carlo over fresh uniform phases."""
    per = max(1, _CHUNK_ELEMS // len(a))
    hits = 0
    done = 0
    chunk = 0
    while done < n_samples:
        m = min(per, n_samples - done)
        u = rng.stream(seed, rng.TAIL_MC, chunk).random((m, len(a)))
        s = np.cos(2.0 * np.pi * u) @ a
        hits += int(np.count_nonzero(s > t))
        done += m
        chunk += 1
    p = hits / n_samples
    return TailEstimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / n_samples), "mc", t, n_samples)


def tail_tilted(a: np.ndarray, t: float, n_samples: int, seed: int, head: int | None = None) -> TailEstimate:
    """Esscher-tilted importance sampling.

    The first ``head`` coefficients are sampled from the tilted (von Mises) law;
    the remaining ones are integrated out exactly, i.e. each sample contributes
    ``w * P(S_tail > t - S_head)`` with ``w = exp(K_head(lam) - lam S_head)``.
    With ``head = None`` every coefficient is sampled and the contribution is the
    indicator ``S > t``.
    """
    try:
        lam = solve_tilt(a, t)
    except ValueError as exc:
        warnings.warn(f"tilt solve failed ({exc}); falling back to plain Monte Carlo", RuntimeWarning)
        est = tail_mc(a, t, n_samples, seed)
        return TailEstimate(est.value, est.stderr, "tilted", t, n_samples, 0.0, fallback=True)
    head = len(a) if head is None else min(int(head), len(a))
    ah, at = a[:head], a[head:]
    k_head = cgf(ah, lam)
    kappa = lam * ah
    per = max(1, _CHUNK_ELEMS // max(head, 1))
    vals = []
    done = chunk = 0
    while done < n_samples:
        m = min(per, n_samples - done)
        g = rng.stream(seed, rng.TAIL_TILTED, chunk)
        theta = g.vonmises(0.0, np.broadcast_to(kappa, (m, head)))
        s_head = np.cos(theta) @ ah
        w = np.exp(k_head - lam * s_head)
        if len(at):
            vals.append(w * tail_by_inversion(at, t - s_head))
        else:
            vals.append(w * (s_head > t))
        done += m
        chunk += 1
    v = np.concatenate(vals)
    return TailEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))), "tilted", t, n_samples, lam)


def tail_saddlepoint(a: np.ndarray, t: float) -> TailEstimate:
    """Lugannani-Rice approximation from the exact cumulant generating function."""
    try:
        lam = solve_tilt(a, t)
    except ValueError:
        return TailEstimate(math.nan, math.nan, "saddlepoint", t, fallback=True)
    k2 = cgf_d2(a, lam)
    if lam < 1e-6:
        return TailEstimate(float(stats.norm.sf(t / math.sqrt(k2))), 0.0, "saddlepoint", t, tilt=lam)
    w = math.copysign(math.sqrt(max(2.0 * (lam * t - cgf(a, lam)), 0.0)), lam)
    u = lam * math.sqrt(k2)
    val = stats.norm.sf(w) + stats.norm.pdf(w) * (1.0 / u - 1.0 / w)
    return TailEstimate(float(val), 0.0, "saddlepoint", t, tilt=lam)


def tail_inversion(a: np.ndarray, t: float) -> TailEstimate:
    return TailEstimate(float(tail_by_inversion(a, np.array([t]))[0]), 0.0, "inversion", t)
