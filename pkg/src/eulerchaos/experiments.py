"""Monte Carlo driver: cells, persistence, summaries and the trend studies.

Layout of an output directory::

    config.cfg                      canonical copy of the configuration
    manifest.json                   config hash, build id, wall time, cell list
    cells/<kind>_N<N>_a<alpha>.csv  one row per realization
    cells/<kind>_N<N>_a<alpha>.json cell summary
    reports.json                    convergence, maximum and barrier studies

Rows are appended in realization order by a single writer, so a killed run
resumes by completing each file's missing suffix.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import __version__, kernels, rng
from .config import ExperimentConfig
from .errors import DomainError, EulerChaosError
from .observables import chaos_normalizer, expected_W, loglog, observe
from .primes import PrimeTable, boundary_block, sieve
from .randfield import Kind, evaluate, min_grid_size, sample
from .stats import wilson

log = logging.getLogger(__name__)

DELTAS = (0.25, 0.5)
BARRIER_CS = (0.5, 1.0)
_ROW_FLUSH = 64


def build_id() -> str:
    return f"eulerchaos {__version__} ({kernels.BACKEND} kernel)"


def cell_name(kind: Kind, N: int, alpha: float) -> str:
    return f"{Kind.parse(kind).value}_N{int(N)}_a{alpha!r}"


def row_columns(R_values: Sequence[float]) -> list[str]:
    return ["seed", "kind", "r", "alpha", "N", "W", "M", "W_gt", "max_val"] + [
        f"W_gt_k{boundary_block(R)}" for R in R_values
    ]


# ---------------------------------------------------------------- persistence


def _complete_rows(path: Path, columns: list[str], seed: int) -> int:
    """Number of valid leading rows in ``path``; trims a torn trailing line."""
    if not path.exists():
        return 0
    raw = path.read_bytes()
    if raw and not raw.endswith(b"\n"):
        raw = raw[: raw.rfind(b"\n") + 1]
        path.write_bytes(raw)
    lines = raw.decode().splitlines()
    if not lines or lines[0].split(",") != columns:
        path.unlink()
        return 0
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != len(columns) or int(parts[0]) != seed or int(parts[2]) != i:
            # keep the consistent prefix only
            path.write_text("\n".join(lines[: i + 1]) + "\n")
            return i
    return len(lines) - 1


def read_rows(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = list(reader)
    cols = {}
    for j, name in enumerate(header):
        vals = [row[j] for row in data]
        cols[name] = np.array(vals) if name == "kind" else np.array(vals, dtype=float)
    return cols


def _num(v: float) -> float | None:
    return None if v is None or not math.isfinite(v) else v


def _clean(obj):
    if isinstance(obj, float):
        return _num(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


# ---------------------------------------------------------------- statistics


@dataclass
class Moments:
    mean: float
    var: float
    stderr: float

    @classmethod
    def of(cls, x: np.ndarray) -> "Moments":
        n = len(x)
        mean = float(np.mean(x)) if n else math.nan
        var = float(np.var(x, ddof=1)) if n > 1 else math.nan
        return cls(mean, var, math.sqrt(var / n) if n > 1 else math.nan)


@dataclass
class Interval:
    estimate: float
    low: float
    high: float
    stderr: float = math.nan


@dataclass
class CellSummary:
    """Per-cell statistics; unresolvable quantities are NaN and listed in ``flags``."""

    alpha: float
    N: int
    kind: str
    n: int
    w_hat: dict
    W: Moments
    M: Moments
    W_gt: Moments
    max_val: Moments
    abs_diff_median: Interval
    rel_diff_median: Interval
    pearson: Interval
    spearman: Interval
    exceed: dict = field(default_factory=dict)
    barrier: list = field(default_factory=list)
    w_hat_check: dict | None = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CellSummary":
        def f(v):
            return math.nan if v is None else v

        def mom(x):
            return Moments(*(f(x[k]) for k in ("mean", "var", "stderr")))

        def itv(x):
            return Interval(*(f(x[k]) for k in ("estimate", "low", "high", "stderr")))

        return cls(
            d["alpha"], d["N"], d["kind"], d["n"], d["w_hat"],
            mom(d["W"]), mom(d["M"]), mom(d["W_gt"]), mom(d["max_val"]),
            itv(d["abs_diff_median"]), itv(d["rel_diff_median"]), itv(d["pearson"]), itv(d["spearman"]),
            d.get("exceed", {}), d.get("barrier", []), d.get("w_hat_check"), d.get("flags", []),
        )


def _bootstrap(data: tuple, statistic, resamples: int, seed: int, paired: bool) -> Interval:
    est = float(statistic(*data))
    n = len(data[0])
    if not math.isfinite(est) or n < 3 or resamples < 2:
        return Interval(est, math.nan, math.nan, math.nan)
    gen = rng.stream(seed, rng.BOOTSTRAP)
    idx = gen.integers(0, n, size=(resamples, n))
    reps = np.array([statistic(*(d[i] for d in data)) for i in idx]) if paired or len(data) > 1 else \
        np.array([statistic(data[0][i]) for i in idx])
    reps = reps[np.isfinite(reps)]
    if len(reps) < 2:
        return Interval(est, math.nan, math.nan, math.nan)
    lo, hi = np.quantile(reps, [0.025, 0.975])
    return Interval(est, float(min(lo, est)), float(max(hi, est)), float(reps.std(ddof=1)))


def _spearman(a, b):
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return math.nan
    return float(stats.spearmanr(a, b)[0])


def _pearson(a, b):
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return math.nan
    return float(np.corrcoef(a, b)[0, 1])


def summarize_rows(
    rows: dict[str, np.ndarray],
    alpha: float,
    N: int,
    kind: Kind,
    w_hat,
    R_values: Sequence[float] = (),
    resamples: int = 1000,
    seed: int = 0,
    w_hat_check=None,
) -> CellSummary:
    W, M = rows["W"], rows["M"]
    n = len(W)
    flags = []
    if n < 2:
        flags.append("variance_undefined")
    ratio = W / w_hat.value
    diff = np.abs(ratio - M)
    rel = diff / M
    boot_seed = seed ^ (int(N) * 1000003) ^ int(round(alpha * 1e6))
    summary = CellSummary(
        alpha=float(alpha),
        N=int(N),
        kind=Kind.parse(kind).value,
        n=n,
        w_hat={"value": w_hat.value, "stderr": w_hat.stderr, "method": w_hat.method, "fallback": w_hat.fallback},
        W=Moments.of(W),
        M=Moments.of(M),
        W_gt=Moments.of(rows["W_gt"]),
        max_val=Moments.of(rows["max_val"]),
        abs_diff_median=_bootstrap((diff,), np.median, resamples, boot_seed, paired=False),
        rel_diff_median=_bootstrap((rel,), np.median, resamples, boot_seed + 1, paired=False),
        pearson=_bootstrap((ratio, M), _pearson, resamples, boot_seed + 2, paired=True),
        spearman=_bootstrap((ratio, M), _spearman, resamples, boot_seed + 3, paired=True),
        w_hat_check=None if w_hat_check is None else {"value": w_hat_check.value, "stderr": w_hat_check.stderr, "method": w_hat_check.method},
        flags=flags,
    )
    if not math.isfinite(summary.spearman.estimate):
        flags.append("correlation_undefined")
    for d in DELTAS:
        k = int(np.count_nonzero(diff > d))
        p, lo, hi = wilson(k, n)
        summary.exceed[repr(d)] = {"fraction": p, "low": lo, "high": hi, "count": k}
    for R in R_values:
        col = rows[f"W_gt_k{boundary_block(R)}"]
        if R > N or not np.all(np.isfinite(col)):
            flags.append(f"barrier_undefined_k{boundary_block(R)}")
            continue
        entry = {"R": R, "k": boundary_block(R), "by_c": {}}
        for c in BARRIER_CS:
            k = int(np.count_nonzero(col > c * w_hat.value))
            p, lo, hi = wilson(k, n)
            entry["by_c"][repr(c)] = {"prob": p, "low": lo, "high": hi, "count": k}
        k0 = int(np.count_nonzero(col > 0))
        p, lo, hi = wilson(k0, n)
        entry["positive"] = {"prob": p, "low": lo, "high": hi, "count": k0}
        summary.barrier.append(entry)
    return summary


# ---------------------------------------------------------------- simulation


def _format_row(values: Sequence) -> str:
    return ",".join(v if isinstance(v, str) else str(v) if isinstance(v, int) else repr(float(v)) for v in values) + "\n"


def _group_rows(fld, alphas, normalizers, R_values, eps, seed, r):
    obs = observe(fld, alphas, normalizers, R_values, eps)
    out = []
    for a in alphas:
        o = obs[a]
        first = o["W_gt"][0] if o["W_gt"] else math.nan
        out.append([seed, fld.kind.value, r, a, fld.limit, o["W"], o["M"], first, o["max_val"]] + o["W_gt"])
    return out


def simulate_group(
    config: ExperimentConfig,
    N: int,
    kind: Kind,
    alphas: Sequence[float],
    table: PrimeTable,
    realizations: int,
    threads: int = 1,
) -> dict[float, Path]:
    """Simulate one ``(N, kind)`` group and persist rows for every alpha."""
    try:
        return _simulate_group(config, N, kind, alphas, table, realizations, threads)
    except OSError as exc:
        raise EulerChaosError(f"I/O failure in cell group kind={kind.value} N={N}: {exc}") from exc


def _simulate_group(config, N, kind, alphas, table, realizations, threads):
    out = Path(config.output_dir) / "cells"
    out.mkdir(parents=True, exist_ok=True)
    cols = row_columns(config.R)
    paths = {a: out / f"{cell_name(kind, N, a)}.csv" for a in alphas}
    have = {a: min(_complete_rows(p, cols, config.seed), realizations) for a, p in paths.items()}
    start = min(have.values())
    if start >= realizations:
        return paths
    G = min_grid_size(N, config.c_res)
    normalizers = {a: chaos_normalizer(table, a, kind) for a in alphas}
    # cutoffs above N have no barrier event; their columns hold NaN
    R_values = [R for R in config.R if R <= N]
    n_missing = len(config.R) - len(R_values)

    def work(r):
        fld = evaluate(sample(kind, table, config.seed, r), table, G, check=False)
        rows = _group_rows(fld, alphas, normalizers, R_values, config.eps, config.seed, r)
        return [row + [math.nan] * n_missing for row in rows]

    handles = {}
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for a, p in paths.items():
            new = not p.exists() or p.stat().st_size == 0
            handles[a] = open(p, "a", newline="")
            if new:
                handles[a].write(",".join(cols) + "\n")
        todo = range(start, realizations)
        results = pool.map(work, todo) if pool else map(work, todo)
        for count, (r, rows) in enumerate(zip(todo, results), 1):
            for a, row in zip(alphas, rows):
                if r >= have[a]:
                    handles[a].write(_format_row(row))
            if count % _ROW_FLUSH == 0:
                for h in handles.values():
                    h.flush()
    finally:
        if pool:
            pool.shutdown()
        for h in handles.values():
            h.close()
    return paths


def _w_hat(config: ExperimentConfig, table: PrimeTable, alpha: float, N: int, kind: Kind):
    seed = config.seed ^ (0x9E3779B97F4A7C15 & (int(N) * 2654435761 + int(round(alpha * 1e6))))
    return expected_W(table, alpha, "tilted", kind=kind, N=N, n_samples=config.w_hat_samples, seed=seed)


def _w_hat_check(config: ExperimentConfig, table: PrimeTable, alpha: float, N: int, kind: Kind):
    if kind is not Kind.PHASE or N != config.N_ladder[0] or config.w_hat_check_samples <= 0:
        return None
    return expected_W(table, alpha, "mc", kind=kind, N=N, n_samples=config.w_hat_check_samples, seed=config.seed + 7)


def summarize_cell(config: ExperimentConfig, table: PrimeTable, alpha: float, N: int, kind: Kind, path: Path) -> CellSummary:
    rows = read_rows(path)
    w_hat = _w_hat(config, table, alpha, N, kind)
    check = _w_hat_check(config, table, alpha, N, kind)
    s = summarize_rows(rows, alpha, N, kind, w_hat, config.R, config.bootstrap_resamples, config.seed, check)
    write_json(path.with_suffix(".json"), s.to_dict())
    return s


def run_cell(
    config: ExperimentConfig,
    alpha: float,
    N: int,
    kind,
    *,
    realizations: int | None = None,
    table: PrimeTable | None = None,
    threads: int = 1,
) -> CellSummary:
    """Simulate, persist and summarize one ``(alpha, N, kind)`` cell.

    ``realizations`` overrides the configured count (any value >= 1).
    """
    kind = Kind.parse(kind)
    if not 0 <= alpha < 2:
        raise DomainError(f"alpha must lie in [0, 2), got {alpha}")
    n_real = config.realizations_for(N) if realizations is None else int(realizations)
    if n_real < 1:
        raise DomainError("need at least one realization")
    table = table if table is not None and table.limit == N else sieve(N)
    paths = simulate_group(config, N, kind, [alpha], table, n_real, threads)
    return summarize_cell(config, table, alpha, N, kind, paths[alpha])


def run_experiment(config: ExperimentConfig, threads: int = 1) -> dict:
    """Run (or resume) every cell of ``config`` and write summaries, reports and manifest."""
    t0 = time.perf_counter()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = out / "config.cfg"
    if cfg_path.exists():
        from .config import parse_config

        old = parse_config(cfg_path.read_text())
        if old.digest() != config.digest():
            raise EulerChaosError(f"{out} holds results for a different configuration")
    cfg_path.write_text(config.to_text(include_output=False))
    big = sieve(max(config.N_ladder))
    summaries: list[CellSummary] = []
    for N in config.N_ladder:
        table = big.restrict(N) if N < big.limit else big
        for kind in config.kinds:
            log.info("cell group N=%d kind=%s", N, kind.value)
            paths = simulate_group(config, N, kind, config.alphas, table, config.realizations_for(N), threads)
            for a in config.alphas:
                summaries.append(summarize_cell(config, table, a, N, kind, paths[a]))
    reports = build_reports(config, summaries)
    write_json(out / "reports.json", reports)
    manifest = {
        "build": build_id(),
        "config_sha256": config.digest(),
        "cells": [f"cells/{cell_name(Kind.parse(s.kind), s.N, s.alpha)}.csv" for s in summaries],
        "wall_time_s": time.perf_counter() - t0,
        "threads": threads,
    }
    write_json(out / "manifest.json", manifest)
    return {"summaries": summaries, "reports": reports, "manifest": manifest}


def load_summaries(output_dir: str | Path) -> list[CellSummary]:
    cells = Path(output_dir) / "cells"
    return [CellSummary.from_dict(json.loads(p.read_text())) for p in sorted(cells.glob("*.json"))]


# ---------------------------------------------------------------- studies


def convergence_test(summaries: Sequence[CellSummary], alpha: float | None = None) -> dict:
    """Trend of ``|W / W_hat - M|`` along the N ladder for one alpha and kind."""
    cells = sorted((s for s in summaries if alpha is None or s.alpha == alpha), key=lambda s: s.N)
    if len(cells) < 3:
        raise DomainError(f"convergence test needs >= 3 ladder points, got {len(cells)}")
    med = np.array([s.abs_diff_median.estimate for s in cells])
    se = np.array([s.abs_diff_median.stderr for s in cells])
    nonincreasing = bool(np.all(np.diff(med) <= 0))
    spread = float(np.ptp(med))
    denom = math.hypot(se[0], se[-1]) if np.all(np.isfinite(se[[0, -1]])) else math.nan
    if denom and math.isfinite(denom) and denom > 0:
        z = (med[0] - med[-1]) / denom
        p_value = float(stats.norm.sf(z))
    else:
        p_value = 0.0 if med[-1] < med[0] else 1.0
    exceed = {}
    for d in DELTAS:
        fr = [s.exceed[repr(d)]["fraction"] for s in cells]
        exceed[repr(d)] = {"fractions": fr, "nonincreasing": bool(np.all(np.diff(fr) <= 0))}
    if np.all(med == 0) and all(f == 0 for e in exceed.values() for f in e["fractions"]):
        verdict = "perfect convergence"
    elif spread <= 1e-12 * max(1.0, float(np.max(np.abs(med)))):
        verdict = "no trend"
    elif nonincreasing:
        verdict = "decreasing"
    elif np.all(np.diff(med) >= 0):
        verdict = "increasing"
    else:
        verdict = "mixed"
    return {
        "alpha": cells[0].alpha,
        "kind": cells[0].kind,
        "N": [s.N for s in cells],
        "median_abs_diff": med.tolist(),
        "median_stderr": se.tolist(),
        "median_nonincreasing": nonincreasing,
        "p_value_decrease": p_value,
        "exceed": exceed,
        "spearman": [s.spearman.estimate for s in cells],
        "verdict": verdict,
    }


def ks_between_kinds(ratio_phase: np.ndarray, ratio_gauss: np.ndarray, level: float = 0.01) -> dict:
    res = stats.ks_2samp(ratio_phase, ratio_gauss)
    return {"statistic": float(res.statistic), "p_value": float(res.pvalue), "indistinguishable": bool(res.pvalue > level)}


def max_study(summaries: Sequence[CellSummary], band=(0.5, 1.2)) -> dict:
    """Mean maximum per N against ``ln ln N``."""
    by_kind: dict[str, dict] = {}
    for key in sorted({s.kind for s in summaries}):
        cells = {s.N: s for s in summaries if s.kind == key}
        Ns = sorted(cells)
        means = [cells[N].max_val.mean for N in Ns]
        ses = [cells[N].max_val.stderr for N in Ns]
        ratios = [m / loglog(N) for m, N in zip(means, Ns)]
        by_kind[key] = {
            "N": Ns,
            "mean_max": means,
            "stderr": ses,
            "ratio_to_loglog": ratios,
            "in_band": [band[0] <= q <= band[1] for q in ratios],
            "increasing": bool(np.all(np.diff(means) > 0)),
        }
    return by_kind


def barrier_study(config: ExperimentConfig, summaries: Sequence[CellSummary] | None = None) -> list[dict]:
    """``P(W_gt > c W_hat)`` across the barrier cutoffs, with Wilson intervals."""
    if summaries is None:
        summaries = load_summaries(config.output_dir)
    out = []
    for s in summaries:
        if len(s.barrier) < 2:
            continue
        entry = {"alpha": s.alpha, "N": s.N, "kind": s.kind, "by_c": {}}
        for c in [repr(c) for c in BARRIER_CS] + ["positive"]:
            seq = [b["positive"] if c == "positive" else b["by_c"][c] for b in s.barrier]
            ok = True
            for prev, nxt in zip(seq, seq[1:]):
                hw = math.hypot((prev["high"] - prev["low"]) / 2, (nxt["high"] - nxt["low"]) / 2)
                ok &= nxt["prob"] <= prev["prob"] + 2 * hw
            entry["by_c"][c] = {"R": [b["R"] for b in s.barrier], "prob": [q["prob"] for q in seq],
                                "low": [q["low"] for q in seq], "high": [q["high"] for q in seq],
                                "monotone_within_error": bool(ok)}
        out.append(entry)
    return out


def build_reports(config: ExperimentConfig, summaries: Sequence[CellSummary]) -> dict:
    reports: dict = {"convergence": [], "max_study": {}, "barrier_study": [], "kind_comparison": []}
    for kind in config.kinds:
        for a in config.alphas:
            cells = [s for s in summaries if s.kind == kind.value and s.alpha == a]
            if len(cells) >= 3:
                reports["convergence"].append(convergence_test(cells, a))
    first_alpha = config.alphas[0]
    reports["max_study"] = max_study([s for s in summaries if s.alpha == first_alpha])
    reports["barrier_study"] = barrier_study(config, summaries)
    if {Kind.PHASE, Kind.GAUSSIAN} <= set(config.kinds):
        N = max(config.N_ladder)
        cells = Path(config.output_dir) / "cells"
        for a in config.alphas:
            rp = read_rows(cells / f"{cell_name(Kind.PHASE, N, a)}.csv")
            rg = read_rows(cells / f"{cell_name(Kind.GAUSSIAN, N, a)}.csv")
            sp = next(s for s in summaries if s.kind == "phase" and s.N == N and s.alpha == a)
            sg = next(s for s in summaries if s.kind == "gaussian" and s.N == N and s.alpha == a)
            ks = ks_between_kinds(rp["W"] / sp.w_hat["value"], rg["W"] / sg.w_hat["value"])
            reports["kind_comparison"].append({"alpha": a, "N": N, **ks})
    return reports


def output_dir_override(default: str) -> str:
    return os.environ.get("EULERCHAOS_OUT", default)
