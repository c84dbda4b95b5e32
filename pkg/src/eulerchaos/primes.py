"""Prime sieving, the scale-block partition and prime reciprocal sums.

Block ``k`` holds the primes with ``e**(k-1) < ln p <= e**k``; block 0 holds the
primes with ``ln p <= 1`` (only ``p = 2``).  Block boundaries are the cutoffs
``N_k = exp(e**k)``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError

CACHE_MAGIC = b"EPRM"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")  # magic, version, limit, count

DEFAULT_SEGMENT = 1 << 21  # odd numbers per segment


def block_boundary(k: int) -> float:
    """Cutoff ``N_k = exp(e**k)`` closing block ``k``."""
    return math.exp(math.exp(k))


def block_index(log_p: np.ndarray) -> np.ndarray:
    """Block index for an array of ``ln p`` values."""
    log_p = np.asarray(log_p, dtype=float)
    k = np.ceil(np.log(np.maximum(log_p, 1e-300))).astype(np.int64)
    return np.where(log_p <= 1.0, 0, np.maximum(k, 1))


def boundary_block(R: float, tol: float = 1e-9) -> int:
    """Return ``k`` if ``R`` equals ``exp(e**k)`` to relative tolerance, else raise."""
    if R <= 1.0:
        raise DomainError(f"cutoff {R} is not a block boundary")
    k = round(math.log(math.log(R)))
    if k < 0 or abs(block_boundary(k) - R) > tol * R:
        raise DomainError(f"cutoff {R} is not a block boundary exp(e^k)")
    return int(k)


def _base_sieve(limit: int) -> np.ndarray:
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def iter_prime_segments(limit: int, segment: int = DEFAULT_SEGMENT) -> Iterator[np.ndarray]:
    """Yield the primes ``<= limit`` in increasing chunks (odd-only segmented sieve).

    Memory is bounded by ``segment`` bytes for the sieve window plus the base primes
    up to ``sqrt(limit)``.
    """
    if limit < 2:
        return
    yield np.array([2], dtype=np.int64)
    base = _base_sieve(math.isqrt(limit) + 1)[1:]  # odd base primes
    low = 3
    span = 2 * segment
    while low <= limit:
        high = min(low + span, limit + 1)  # exclusive; low is odd
        count = (high - low + 1) // 2
        mask = np.ones(count, dtype=bool)
        for p in base:
            p = int(p)
            p2 = p * p
            if p2 >= high:
                break
            start = max(p2, ((low + p - 1) // p) * p)
            if start % 2 == 0:
                start += p
            if start >= high:
                continue
            mask[(start - low) // 2 :: p] = False
        idx = np.flatnonzero(mask)
        yield low + 2 * idx.astype(np.int64)
        low += span


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Immutable table of the primes up to ``limit``.

    ``primes`` is sorted, so each block occupies a contiguous slice given by
    ``block_starts`` (``block_starts[k]:block_starts[k+1]``).
    """

    limit: int
    primes: np.ndarray
    log_p: np.ndarray = field(repr=False)
    block_of: np.ndarray = field(repr=False)
    block_starts: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.primes, self.log_p, self.block_of, self.block_starts):
            arr.setflags(write=False)

    @classmethod
    def from_primes(cls, limit: int, primes: np.ndarray) -> "PrimeTable":
        primes = np.ascontiguousarray(primes, dtype=np.int64)
        log_p = np.log(primes.astype(float))
        block_of = block_index(log_p)
        n_blocks = int(block_of[-1]) + 1 if len(primes) else 0
        starts = np.searchsorted(block_of, np.arange(n_blocks + 1), side="left").astype(np.int64)
        return cls(int(limit), primes, log_p, block_of, starts)

    def __len__(self) -> int:
        return len(self.primes)

    @property
    def n_cut(self) -> int:
        """Largest block index present in the table."""
        return len(self.block_starts) - 2

    @property
    def identity(self) -> tuple[int, int]:
        return (self.limit, len(self.primes))

    def block_slice(self, k: int) -> slice:
        if not 0 <= k <= self.n_cut:
            raise DomainError(f"block {k} outside 0..{self.n_cut}")
        return slice(int(self.block_starts[k]), int(self.block_starts[k + 1]))

    def block_complete(self, k: int) -> bool:
        """True if every prime of block ``k`` is in the table."""
        return block_boundary(k) <= self.limit

    def count_upto(self, x: float) -> int:
        """Number of primes ``<= x`` in the table (index of the first prime ``> x``)."""
        return int(np.searchsorted(self.primes, math.floor(x), side="right"))

    def restrict(self, limit: int) -> "PrimeTable":
        """Sub-table of the primes ``<= limit`` (shares no state with ``self``)."""
        if limit > self.limit:
            raise DomainError(f"cannot restrict limit {self.limit} table to {limit}")
        return PrimeTable.from_primes(limit, self.primes[: self.count_upto(limit)].copy())


def sieve(limit: int, cache_dir: str | Path | None = None) -> PrimeTable:
    """All primes ``<= limit`` with logs and block indices.

    If ``cache_dir`` is given the flat binary cache ``primes_<limit>.bin`` is read
    when present and written otherwise.
    """
    limit = int(limit)
    if limit < 2:
        raise DomainError(f"sieve limit must be >= 2, got {limit} (empty table)")
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"primes_{limit}.bin"
        if path.exists():
            return PrimeTable.from_primes(limit, load_cache(path, limit))
    primes = np.concatenate(list(iter_prime_segments(limit)))
    if path is not None:
        save_cache(path, limit, primes)
    return PrimeTable.from_primes(limit, primes)


def save_cache(path: str | Path, limit: int, primes: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, int(limit), len(primes)))
        fh.write(np.asarray(primes, dtype="<u8").tobytes())
    tmp.replace(path)


def load_cache(path: str | Path, limit: int | None = None) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, file_limit, count = _HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC or version != CACHE_VERSION:
        raise ValueError(f"{path}: not a prime cache (magic={magic!r}, version={version})")
    if limit is not None and file_limit != limit:
        raise ValueError(f"{path}: cache limit {file_limit} != requested {limit}")
    body = np.frombuffer(raw, dtype="<u8", offset=_HEADER.size)
    if len(body) != count:
        raise ValueError(f"{path}: truncated cache ({len(body)} of {count} primes)")
    return body.astype(np.int64)


def _check_range(table: PrimeTable, R: float, N: float) -> None:
    if R > N:
        raise DomainError(f"need R <= N, got R={R}, N={N}")
    if N > table.limit:
        raise DomainError(f"N={N} exceeds table limit {table.limit}")


def prime_reciprocal_sum(table: PrimeTable, R: float, N: float) -> float:
    """Exact sum of ``1/p`` over primes ``R < p <= N`` (compensated summation)."""
    _check_range(table, R, N)
    lo, hi = table.count_upto(R), table.count_upto(N)
    return math.fsum(1.0 / table.primes[lo:hi].astype(float))


def sigma_sq(table: PrimeTable, R: float, N: float) -> float:
    """Variance of the Gaussian increment over primes in ``(R, N]``: half the reciprocal sum."""
    return 0.5 * prime_reciprocal_sum(table, R, N)


def block_reciprocal_sums(table: PrimeTable) -> np.ndarray:
    """Per-block ``sum 1/p`` for blocks ``0..n_cut`` (the last may be truncated)."""
    inv = 1.0 / table.primes.astype(float)
    return np.array([math.fsum(inv[table.block_slice(k)]) for k in range(table.n_cut + 1)])


def streaming_block_sums(
    k_max: int,
    deltas: Sequence[float] = (),
    segment: int = DEFAULT_SEGMENT,
) -> tuple[np.ndarray, np.ndarray]:
    """Complete-block sums for blocks ``0..k_max`` without storing the primes.

    Returns ``(recip, cos_sums)`` where ``recip[k] = sum_{p in block k} 1/p`` and
    ``cos_sums[k, d] = sum_{p in block k} cos(deltas[d] ln p) / p``.  Sieves up to
    ``exp(e**k_max)``; ``k_max = 3`` means about ``5.3e8``.
    """
    limit = int(math.floor(block_boundary(k_max)))
    deltas = np.asarray(deltas, dtype=float)
    parts_r: list[list[float]] = [[] for _ in range(k_max + 1)]
    parts_c: list[list[list[float]]] = [[[] for _ in deltas] for _ in range(k_max + 1)]
    for chunk in iter_prime_segments(limit, segment):
        lp = np.log(chunk.astype(float))
        blk = block_index(lp)
        inv = 1.0 / chunk.astype(float)
        for k in np.unique(blk):
            sel = blk == k
            parts_r[k].append(math.fsum(inv[sel]))
            for d, delta in enumerate(deltas):
                parts_c[k][d].append(math.fsum(np.cos(delta * lp[sel]) * inv[sel]))
    recip = np.array([math.fsum(p) for p in parts_r])
    cos_sums = np.array([[math.fsum(p) for p in row] for row in parts_c]).reshape(k_max + 1, len(deltas))
    return recip, cos_sums


def is_prime_trial(n: int) -> bool:
    """Trial-division primality, used as an independent check on sieve output."""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for d in range(3, math.isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True
