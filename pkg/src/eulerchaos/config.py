"""Experiment configuration and its key-value text format.

One ``key = value`` per line, ``#`` starts a comment, lists are comma separated::

    alphas = 0.5, 1.0, 1.5
    N_ladder = 10^3, 10^4, 10^5, 10^6
    kinds = phase, gaussian
    realizations = 2000
    realizations_at = 10^6:500
    c_res = 0.1
    seed = 20190101
    R = exp(e^1), exp(e^2)
    eps = 0.5
    output_dir = runs/default
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import UsageError
from .primes import block_boundary
from .randfield import C_RES, Kind

_BOUNDARY = re.compile(r"^exp\(e(?:\^(\d+))?\)$")
_POWER = re.compile(r"^(\d+)\^(\d+)$")


def parse_number(text: str) -> float:
    s = text.strip().replace(" ", "")
    m = _BOUNDARY.match(s)
    if m:
        return block_boundary(int(m.group(1) or 1))
    m = _POWER.match(s)
    if m:
        return float(int(m.group(1)) ** int(m.group(2)))
    try:
        return float(s)
    except ValueError:
        raise UsageError(f"cannot parse number {text!r}") from None


def parse_int(text: str) -> int:
    v = parse_number(text)
    if v != int(v):
        raise UsageError(f"expected an integer, got {text!r}")
    return int(v)


def _fmt_float(v: float) -> str:
    for k in range(0, 12):
        if abs(block_boundary(k) - v) <= 1e-12 * v:
            return f"exp(e^{k})"
    return repr(float(v))


@dataclass(frozen=True)
class ExperimentConfig:
    alphas: tuple[float, ...] = (0.5, 1.0, 1.5)
    N_ladder: tuple[int, ...] = (10**3, 10**4, 10**5, 10**6)
    kinds: tuple[Kind, ...] = (Kind.PHASE, Kind.GAUSSIAN)
    realizations: int = 2000
    realizations_at: dict = field(default_factory=lambda: {10**6: 500})
    c_res: float = C_RES
    seed: int = 20190101
    R: tuple[float, ...] = (block_boundary(1), block_boundary(2))
    eps: float = 0.5
    output_dir: str = "runs/default"
    w_hat_samples: int = 20000
    w_hat_check_samples: int = 1000000
    bootstrap_resamples: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "N_ladder", tuple(int(n) for n in self.N_ladder))
        object.__setattr__(self, "kinds", tuple(Kind.parse(k) for k in self.kinds))
        object.__setattr__(self, "R", tuple(float(r) for r in self.R))
        object.__setattr__(self, "realizations_at", {int(k): int(v) for k, v in dict(self.realizations_at).items()})
        if not self.alphas or any(not 0 < a < 2 for a in self.alphas):
            raise UsageError(f"alphas must lie in (0, 2): {self.alphas}")
        if not self.N_ladder or any(b <= a for a, b in zip(self.N_ladder, self.N_ladder[1:])):
            raise UsageError(f"N_ladder must be strictly increasing: {self.N_ladder}")
        if self.N_ladder[0] < 16:
            raise UsageError("N_ladder entries must be >= 16")
        counts = [self.realizations] + list(self.realizations_at.values())
        if any(c < 100 for c in counts):
            raise UsageError(f"realizations must be >= 100: {counts}")
        if not self.kinds:
            raise UsageError("kinds must be nonempty")
        if self.eps <= 0 or self.c_res <= 0:
            raise UsageError("eps and c_res must be positive")

    def realizations_for(self, N: int) -> int:
        return self.realizations_at.get(int(N), self.realizations)

    def with_output(self, output_dir: str | Path) -> "ExperimentConfig":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw["output_dir"] = str(output_dir)
        return ExperimentConfig(**kw)

    def to_text(self, include_output: bool = True) -> str:
        lines = [
            f"alphas = {', '.join(repr(a) for a in self.alphas)}",
            f"N_ladder = {', '.join(str(n) for n in self.N_ladder)}",
            f"kinds = {', '.join(k.value for k in self.kinds)}",
            f"realizations = {self.realizations}",
            f"realizations_at = {', '.join(f'{k}:{v}' for k, v in sorted(self.realizations_at.items()))}",
            f"c_res = {self.c_res!r}",
            f"seed = {self.seed}",
            f"R = {', '.join(_fmt_float(r) for r in self.R)}",
            f"eps = {self.eps!r}",
            f"w_hat_samples = {self.w_hat_samples}",
            f"w_hat_check_samples = {self.w_hat_check_samples}",
            f"bootstrap_resamples = {self.bootstrap_resamples}",
        ]
        if include_output:
            lines.append(f"output_dir = {self.output_dir}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """Hash of every setting that affects results (output location excluded)."""
        return hashlib.sha256(self.to_text(include_output=False).encode()).hexdigest()


_LIST_KEYS = {"alphas": parse_number, "N_ladder": parse_int, "R": parse_number, "kinds": str.strip}
_SCALAR_KEYS = {
    "realizations": parse_int,
    "c_res": parse_number,
    "seed": parse_int,
    "eps": parse_number,
    "output_dir": str.strip,
    "w_hat_samples": parse_int,
    "w_hat_check_samples": parse_int,
    "bootstrap_resamples": parse_int,
}


def parse_config(text: str) -> ExperimentConfig:
    kw: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _LIST_KEYS:
            kw[key] = tuple(_LIST_KEYS[key](v) for v in value.split(",") if v.strip())
        elif key in _SCALAR_KEYS:
            kw[key] = _SCALAR_KEYS[key](value)
        elif key == "realizations_at":
            pairs = {}
            for item in filter(None, (v.strip() for v in value.split(","))):
                n, _, c = item.partition(":")
                pairs[parse_int(n)] = parse_int(c)
            kw[key] = pairs
        else:
            raise UsageError(f"line {lineno}: unknown key {key!r}")
    return ExperimentConfig(**kw)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    return parse_config(path.read_text())
