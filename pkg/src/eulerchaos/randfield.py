"""Random phases / Gaussian coefficients and evaluation of the fields on grids.

Both kinds are evaluated in the amplitude-phase form ``amp_p cos(x ln p - phase_p)``:

* phase kind: ``amp = p**-0.5``, ``phase = theta_p`` (uniform on ``[0, 2 pi)``);
* Gaussian kind: ``W1 cos + W2 sin = rho cos(x ln p - atan2(W2, W1))`` with
  ``rho = |(W1, W2)| / sqrt(2 p)``, so each prime carries variance ``1/(2p)``
  exactly as in the phase kind.
"""
from __future__ import annotations

import enum
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels, rng
from .errors import DomainError, ResolutionError
from .primes import PrimeTable

C_RES = 0.1
RESYNC = 1024
_DUMP_MAGIC = b"EGRD"
_DUMP_HEADER = struct.Struct("<4sIQQQQB")  # magic, version, limit, n_primes, grid_size, n_blocks, kind


class Kind(str, enum.Enum):
    PHASE = "phase"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value: "str | Kind") -> "Kind":
        try:
            return cls(value.lower() if isinstance(value, str) else value)
        except ValueError:
            raise DomainError(f"unknown field kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Randomness of one realization: phases (phase kind) or coefficient pairs (Gaussian)."""

    kind: Kind
    seed: int
    realization: int
    table_id: tuple[int, int]
    phases: np.ndarray | None = None
    gauss: np.ndarray | None = None

    def amplitude_phase(self, table: PrimeTable) -> tuple[np.ndarray, np.ndarray]:
        if table.identity != self.table_id:
            raise DomainError(f"sample drawn for table {self.table_id}, got {table.identity}")
        if self.kind is Kind.PHASE:
            return 1.0 / np.sqrt(table.primes.astype(float)), self.phases
        w1, w2 = self.gauss[:, 0], self.gauss[:, 1]
        amp = np.hypot(w1, w2) / np.sqrt(2.0 * table.primes.astype(float))
        return amp, np.arctan2(w2, w1)


def sample(kind, table: PrimeTable, seed: int, realization: int = 0) -> FieldSample:
    """One independent draw per prime, a pure function of ``(kind, seed, realization)``."""
    kind = Kind.parse(kind)
    if len(table) == 0:
        raise DomainError("empty prime table")
    n = len(table)
    if kind is Kind.PHASE:
        u = rng.stream(seed, rng.PHASE, realization).random(n)
        return FieldSample(kind, seed, realization, table.identity, phases=2.0 * np.pi * u)
    g = rng.stream(seed, rng.GAUSSIAN, realization).standard_normal((n, 2))
    return FieldSample(kind, seed, realization, table.identity, gauss=g)


@dataclass(frozen=True, eq=False)
class GridField:
    """Field values on ``x_i = i / grid_size``, split by prime block."""

    grid: np.ndarray
    block_values: np.ndarray  # (n_blocks, grid_size + 1)
    kind: Kind
    limit: int
    table_id: tuple[int, int]
    seed: int | None = None
    realization: int | None = None
    totals: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.totals is None:
            object.__setattr__(self, "totals", self.block_values.sum(axis=0))

    @property
    def n_cut(self) -> int:
        return self.block_values.shape[0] - 1

    @property
    def grid_size(self) -> int:
        return len(self.grid) - 1


def min_grid_size(limit: float, c_res: float = C_RES) -> int:
    """Smallest ``G`` with ``1/G <= c_res / ln(limit)``."""
    return max(1, math.ceil(math.log(limit) / c_res - 1e-9))


def check_resolution(grid_size: int, limit: float, c_res: float = C_RES) -> None:
    if grid_size < min_grid_size(limit, c_res):
        raise ResolutionError(
            f"grid_size={grid_size} too coarse for limit={limit}: need >= {min_grid_size(limit, c_res)} (c_res={c_res})"
        )


def _kernel_chunks(grid_size: int, threads: int) -> list[tuple[int, int]]:
    n = grid_size + 1
    bounds = list(range(0, n, RESYNC)) + [n]
    chunks = list(zip(bounds[:-1], bounds[1:]))
    if threads <= 1 or len(chunks) == 1:
        return [(0, n)]
    return chunks


def evaluate(
    sample: FieldSample,
    table: PrimeTable,
    grid_size: int,
    *,
    c_res: float = C_RES,
    check: bool = True,
    backend: str | None = None,
    threads: int = 1,
) -> GridField:
    """Evaluate the realization on the uniform grid with the rotation-recurrence kernel.

    Grid chunks start on re-synchronisation points, so the result does not depend
    on ``threads``.
    """
    if check:
        check_resolution(grid_size, table.limit, c_res)
    amp, phase = sample.amplitude_phase(table)
    kern = kernels.get_kernel(backend)
    args = (table.log_p, np.ascontiguousarray(amp), np.ascontiguousarray(phase), table.block_starts, grid_size, RESYNC)
    chunks = _kernel_chunks(grid_size, threads)
    if len(chunks) == 1:
        values = kern(*args)
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: kern(*args, c[0], c[1]), chunks))
        values = np.concatenate(parts, axis=1)
    grid = np.arange(grid_size + 1) / grid_size
    return GridField(grid, values, sample.kind, table.limit, table.identity, sample.seed, sample.realization)


def evaluate_many(
    kind,
    table: PrimeTable,
    seed: int,
    realizations: Sequence[int],
    grid_size: int,
    *,
    c_res: float = C_RES,
    backend: str | None = None,
    threads: int = 1,
) -> list[GridField]:
    """Sample and evaluate several realizations; output order follows ``realizations``."""
    check_resolution(grid_size, table.limit, c_res)

    def one(r):
        return evaluate(sample(kind, table, seed, r), table, grid_size, check=False, backend=backend)

    if threads <= 1:
        return [one(r) for r in realizations]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(one, realizations))


def naive_evaluate(sample: FieldSample, table: PrimeTable, grid_size: int) -> np.ndarray:
    """Reference double loop in the ``cos*cos + sin*sin`` form; returns totals only."""
    out = np.zeros(grid_size + 1)
    for i in range(grid_size + 1):
        x = i / grid_size
        acc = 0.0
        for j, p in enumerate(table.primes):
            lp = math.log(int(p))
            if sample.kind is Kind.PHASE:
                th = sample.phases[j]
                acc += (math.cos(x * lp) * math.cos(th) + math.sin(x * lp) * math.sin(th)) / math.sqrt(p)
            else:
                w1, w2 = sample.gauss[j]
                acc += (w1 * math.cos(x * lp) + w2 * math.sin(x * lp)) / math.sqrt(2.0 * p)
        out[i] = acc
    return out


def point_contributions(sample: FieldSample, table: PrimeTable, xs) -> np.ndarray:
    """Per-prime terms at arbitrary points, shape ``(len(xs), n_primes)`` (direct trig)."""
    amp, phase = sample.amplitude_phase(table)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    return amp[None, :] * np.cos(xs[:, None] * table.log_p[None, :] - phase[None, :])


def evaluate_points(sample: FieldSample, table: PrimeTable, xs) -> np.ndarray:
    """Block values at arbitrary points, shape ``(n_blocks, len(xs))``."""
    contrib = point_contributions(sample, table, xs)
    return np.stack([contrib[:, table.block_slice(k)].sum(axis=1) for k in range(table.n_cut + 1)])


def prefix_field(fld: GridField, k: int) -> GridField:
    """Field restricted to blocks ``0..k`` (the prefix ``X_{N_k}``)."""
    if not 0 <= k <= fld.n_cut:
        raise DomainError(f"prefix block {k} outside 0..{fld.n_cut}")
    if k == fld.n_cut:
        return fld
    vals = fld.block_values[: k + 1]
    return GridField(fld.grid, vals, fld.kind, fld.limit, fld.table_id, fld.seed, fld.realization)


def prefix_totals(fld: GridField) -> np.ndarray:
    """Cumulative block sums, row ``k`` is the prefix through block ``k``."""
    return np.cumsum(fld.block_values, axis=0)


def write_csv(fld: GridField, path_or_file, blocks: bool = False) -> None:
    """CSV with columns ``x,total`` and optionally ``block_0..block_n``."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        cols = ["x", "total"] + ([f"block_{k}" for k in range(fld.n_cut + 1)] if blocks else [])
        fh.write(",".join(cols) + "\n")
        for i, x in enumerate(fld.grid):
            row = [repr(float(x)), repr(float(fld.totals[i]))]
            if blocks:
                row += [repr(float(v)) for v in fld.block_values[:, i]]
            fh.write(",".join(row) + "\n")
    finally:
        if own:
            fh.close()


def write_binary(fld: GridField, path) -> None:
    """Header followed by little-endian float64 block values, row-major ``(n_blocks, G+1)``."""
    with open(path, "wb") as fh:
        kind_code = 0 if fld.kind is Kind.PHASE else 1
        fh.write(_DUMP_HEADER.pack(_DUMP_MAGIC, 1, fld.limit, fld.table_id[1], fld.grid_size, fld.n_cut + 1, kind_code))
        fh.write(np.ascontiguousarray(fld.block_values, dtype="<f8").tobytes())


def read_binary(path) -> GridField:
    raw = Path(path).read_bytes()
    magic, version, limit, n_primes, grid_size, n_blocks, kind_code = _DUMP_HEADER.unpack_from(raw)
    if magic != _DUMP_MAGIC or version != 1:
        raise ValueError(f"{path}: not a grid dump")
    vals = np.frombuffer(raw, dtype="<f8", offset=_DUMP_HEADER.size).reshape(n_blocks, grid_size + 1).copy()
    kind = Kind.PHASE if kind_code == 0 else Kind.GAUSSIAN
    return GridField(np.arange(grid_size + 1) / grid_size, vals, kind, limit, (limit, n_primes))
