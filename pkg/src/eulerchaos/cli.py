"""Command-line interface: one subcommand per module.

Exit status is 0 on success, 1 on a domain error and 2 on a usage error.
Data go to ``--out`` (or standard output); diagnostics go to standard error.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import math
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config, parse_config, parse_number
from .errors import DomainError, EulerChaosError, UsageError
from .experiments import build_id

log = logging.getLogger("eulerchaos")

OUT_ENV = "EULERCHAOS_OUT"


def _number(text: str) -> float:
    try:
        return parse_number(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int(text: str) -> int:
    v = _number(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(v)


@contextlib.contextmanager
def _output(path: str | None, binary: bool = False):
    if path is None or path == "-":
        yield sys.stdout.buffer if binary else sys.stdout
        return
    with open(path, "wb" if binary else "w", newline=None if binary else "") as fh:
        yield fh


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


# ---------------------------------------------------------------- commands


def cmd_sieve(args) -> None:
    from .primes import sieve

    table = sieve(args.limit, cache_dir=args.cache)
    with _output(args.out) as fh:
        if args.count:
            fh.write(f"{len(table)}\n")
        else:
            fh.write("".join(f"{int(p)}\n" for p in table.primes))
    log.info("%d primes up to %d", len(table), args.limit)


def cmd_sample(args) -> None:
    from .primes import sieve
    from .randfield import Kind, sample

    table = sieve(args.limit)
    s = sample(args.kind, table, args.seed, args.realization)
    with _output(args.out) as fh:
        w = _writer(fh)
        if s.kind is Kind.PHASE:
            w.writerow(["p", "theta"])
            w.writerows([int(p), repr(float(t))] for p, t in zip(table.primes, s.phases))
        else:
            w.writerow(["p", "w1", "w2"])
            w.writerows([int(p), repr(float(a)), repr(float(b))] for p, (a, b) in zip(table.primes, s.gauss))


def cmd_field(args) -> None:
    from .primes import sieve
    from .randfield import evaluate, min_grid_size, sample, write_binary, write_csv

    table = sieve(args.limit)
    need = min_grid_size(args.limit)
    grid = args.grid or need
    if grid < need:
        log.warning("grid %d is coarser than the resolution rule (%d) for limit %d", grid, need, args.limit)
    fld = evaluate(sample(args.kind, table, args.seed, args.realization), table, grid, check=False, threads=args.threads)
    if args.format == "binary":
        if args.out is None:
            raise UsageError("binary output needs --out")
        write_binary(fld, args.out)
    else:
        with _output(args.out) as fh:
            write_csv(fld, fh, blocks=args.blocks)


def cmd_observables(args) -> None:
    from .observables import chaos_normalizer, expected_W, observe
    from .primes import boundary_block, sieve
    from .randfield import Kind, evaluate_many, min_grid_size

    table = sieve(args.limit)
    kind = Kind.parse(args.kind)
    if args.expected_w:
        with _output(args.out) as fh:
            w = _writer(fh)
            w.writerow(["alpha", "N", "kind", "method", "value", "stderr", "threshold"])
            for a in args.alpha:
                e = expected_W(table, a, args.expected_w, kind=kind, n_samples=args.samples, seed=args.seed)
                w.writerow([repr(a), args.limit, kind.value, e.method, repr(e.value), repr(e.stderr), repr(e.threshold)])
        return
    for R in args.R:
        boundary_block(R)
    grid = args.grid or min_grid_size(args.limit)
    norms = {a: chaos_normalizer(table, a, kind) for a in args.alpha}
    ks = [boundary_block(R) for R in args.R]
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(["seed", "kind", "r", "alpha", "N", "W", "M", "max_val"] + [f"W_gt_k{k}" for k in ks])
        for lo in range(0, args.realizations, 64):
            rs = range(lo, min(lo + 64, args.realizations))
            for r, fld in zip(rs, evaluate_many(kind, table, args.seed, rs, grid, threads=args.threads)):
                obs = observe(fld, args.alpha, norms, args.R, args.eps)
                for a in args.alpha:
                    o = obs[a]
                    w.writerow([args.seed, kind.value, r, repr(a), args.limit] + [repr(o[c]) for c in ("W", "M", "max_val")]
                               + [repr(v) for v in o["W_gt"]])


def cmd_bridge(args) -> None:
    from .bridge import bridge_decompose, line_crossing_prob

    if args.mode == "crossing":
        res = line_crossing_prob(args.l0, args.lT, args.T, args.paths, args.steps, seed=args.seed, correct=not args.no_correct)
        with _output(args.out) as fh:
            w = _writer(fh)
            w.writerow(["n_steps", "estimate", "stderr", "corrected", "corrected_stderr", "closed_form"])
            for lv in res.levels:
                w.writerow([lv.n_steps, repr(lv.estimate), repr(lv.stderr), repr(lv.corrected), repr(lv.corrected_stderr), repr(res.closed_form)])
        return
    from .primes import sieve
    from .randfield import Kind, sample

    table = sieve(args.limit)
    samples = [sample(Kind.GAUSSIAN, table, args.seed, r) for r in range(args.realizations)]
    report = bridge_decompose(samples, table, args.R, args.limit, args.x, extra=args.extra)
    with _output(args.out) as fh:
        report.write_csv(fh)


def cmd_cov_report(args) -> None:
    from .increments import covariance_report, decoupling_report, sample_block_values, write_covariance_csv
    from .primes import sieve
    from .randfield import sample

    table = sieve(args.limit)
    samples = [sample(args.kind, table, args.seed, r) for r in range(args.realizations)]
    vals = sample_block_values(samples, table, [args.x, args.x2])
    reports = covariance_report(vals, table, args.x, args.x2)
    with _output(args.out) as fh:
        write_covariance_csv(reports, fh)
    with contextlib.suppress(DomainError):
        d = decoupling_report(vals, table, args.x, args.x2, delta=args.delta)
        for name, part in (("after", d.after), ("before", d.before)):
            if part is not None:
                log.info("decoupling %s m=%d blocks=%s corr=%.4f +- %.4f", name, part.m, part.blocks, part.correlation, part.stderr)


def _experiment_dir(args, config: ExperimentConfig) -> ExperimentConfig:
    out = args.out or os.environ.get(OUT_ENV)
    return config.with_output(out) if out else config


def _run(config: ExperimentConfig, threads: int) -> None:
    from .experiments import run_experiment

    res = run_experiment(config, threads=threads)
    for rep in res["reports"]["convergence"]:
        log.info("convergence alpha=%s kind=%s: %s", rep["alpha"], rep["kind"], rep["verdict"])
    print(Path(config.output_dir) / "manifest.json")


def cmd_experiment(args) -> None:
    config = load_config(args.config) if args.config else ExperimentConfig()
    _run(_experiment_dir(args, config), args.threads)


def cmd_resume(args) -> None:
    out = args.out or os.environ.get(OUT_ENV)
    if not out:
        raise UsageError("resume needs --out (or EULERCHAOS_OUT) naming an experiment directory")
    cfg = Path(out) / "config.cfg"
    if not cfg.is_file():
        raise UsageError(f"no experiment configuration at {cfg}")
    _run(parse_config(cfg.read_text()).with_output(out), args.threads)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eulerchaos", description="Random Euler product fields, chaos and high points.")
    p.add_argument("--version", action="version", version=build_id())
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_int, default=0, help="base seed (default 0)")
    common.add_argument("--out", default=None, help="output file or directory (default: standard output)")
    common.add_argument("--threads", type=_int, default=os.cpu_count() or 1, help="worker threads (default: logical cores)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=func)
        return sp

    kinds = ("phase", "gaussian")

    sp = add("sieve", cmd_sieve, "List primes up to a limit.")
    sp.add_argument("--limit", type=_int, required=True)
    sp.add_argument("--cache", default=None, help="directory for the binary prime cache")
    sp.add_argument("--count", action="store_true", help="print only the number of primes")

    sp = add("sample", cmd_sample, "Draw one realization of the random coefficients.")
    sp.add_argument("--limit", type=_int, required=True)
    sp.add_argument("--kind", choices=kinds, default="phase")
    sp.add_argument("--realization", type=_int, default=0)

    sp = add("field", cmd_field, "Evaluate one realization of the field on a uniform grid of [0, 1].")
    sp.add_argument("--limit", type=_int, required=True)
    sp.add_argument("--grid", type=_int, default=None, help="grid intervals (default: resolution rule)")
    sp.add_argument("--kind", choices=kinds, default="phase")
    sp.add_argument("--realization", type=_int, default=0)
    sp.add_argument("--blocks", action="store_true", help="add one column per block")
    sp.add_argument("--format", choices=("csv", "binary"), default="csv")

    sp = add("observables", cmd_observables, "Chaos mass, high points and barrier measures per realization.")
    sp.add_argument("--limit", type=_int, required=True)
    sp.add_argument("--alpha", type=_number, nargs="+", default=[1.0])
    sp.add_argument("--kind", choices=kinds, default="phase")
    sp.add_argument("--realizations", type=_int, default=100)
    sp.add_argument("--grid", type=_int, default=None)
    sp.add_argument("--R", type=_number, nargs="*", default=[], help="barrier cutoffs, e.g. 'exp(e^1)'")
    sp.add_argument("--eps", type=_number, default=0.5)
    sp.add_argument("--expected-w", choices=("mc", "tilted", "saddlepoint", "inversion"), default=None,
                    help="print the expected high-point measure instead of per-realization rows")
    sp.add_argument("--samples", type=_int, default=20000, help="Monte Carlo samples for --expected-w")

    sp = add("bridge", cmd_bridge, "Bridge decomposition and line-crossing probabilities.")
    sp.add_argument("mode", choices=("crossing", "decompose"))
    sp.add_argument("--l0", type=_number, default=1.0)
    sp.add_argument("--lT", type=_number, default=1.0)
    sp.add_argument("--T", type=_number, default=1.0)
    sp.add_argument("--paths", type=_int, default=10000)
    sp.add_argument("--steps", type=_int, nargs="+", default=[2**10, 2**12, 2**14])
    sp.add_argument("--no-correct", action="store_true", help="skip the bridge-corrected estimate")
    sp.add_argument("--limit", type=_int, default=10**5)
    sp.add_argument("--R", type=_number, default=math.exp(math.e))
    sp.add_argument("--x", type=_number, default=0.0)
    sp.add_argument("--extra", type=_number, nargs="*", default=[], help="additional interior cutoffs")
    sp.add_argument("--realizations", type=_int, default=1000)

    sp = add("cov-report", cmd_cov_report, "Exact against empirical block covariances at two points.")
    sp.add_argument("--limit", type=_int, required=True)
    sp.add_argument("--x", type=_number, default=0.0)
    sp.add_argument("--x2", type=_number, required=True)
    sp.add_argument("--kind", choices=kinds, default="phase")
    sp.add_argument("--realizations", type=_int, default=1000)
    sp.add_argument("--delta", type=_int, default=2)

    sp = add("experiment", cmd_experiment, "Run the full Monte Carlo experiment from a config file.")
    sp.add_argument("--config", default=None, help="key = value config file (default: built-in defaults)")

    add("resume", cmd_resume, "Resume an interrupted experiment in the --out directory.")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        parser.error("--threads must be positive")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"eulerchaos: usage error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"eulerchaos: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except (EulerChaosError, OSError) as exc:
        print(f"eulerchaos: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
