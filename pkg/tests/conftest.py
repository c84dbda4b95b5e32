import json
from pathlib import Path

import numpy as np
import pytest

from eulerchaos import kernels
from eulerchaos.primes import PrimeTable, sieve

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def table_1e3():
    return sieve(1000)


@pytest.fixture(scope="session")
def table_1e5():
    return sieve(10**5)


@pytest.fixture(scope="session")
def table_1e6():
    return sieve(10**6)


def single_prime_table(p: int = 2) -> PrimeTable:
    return PrimeTable.from_primes(p, np.array([p], dtype=np.int64))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
