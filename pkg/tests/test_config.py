import pytest

from eulerchaos.config import ExperimentConfig, load_config, parse_config, parse_number
from eulerchaos.errors import UsageError
from eulerchaos.primes import block_boundary


def test_defaults_round_trip():
    c = ExperimentConfig()
    assert parse_config(c.to_text()) == c
    assert c.realizations_for(10**6) == 500 and c.realizations_for(10**5) == 2000
    assert c.R == (block_boundary(1), block_boundary(2))


def test_parse_numbers():
    assert parse_number("10^6") == 1e6
    assert parse_number("exp(e^2)") == block_boundary(2)
    assert parse_number("exp(e)") == block_boundary(1)
    assert parse_number("0.25") == 0.25
    with pytest.raises(UsageError):
        parse_number("lots")


def test_parse_file(tmp_path):
    p = tmp_path / "x.cfg"
    p.write_text("# small run\nalphas = 1.0\nN_ladder = 10^3, 10^4, 10^5\nkinds = phase\nrealizations = 100\n"
                 "realizations_at =\nR = exp(e^1)\noutput_dir = out  # trailing comment\n")
    c = load_config(p)
    assert c.alphas == (1.0,) and c.N_ladder == (1000, 10000, 100000) and c.output_dir == "out"
    assert c.realizations_at == {}


@pytest.mark.parametrize("text", [
    "alphas = 2.0", "alphas = 0", "N_ladder = 10^4, 10^3", "realizations = 99", "kinds =",
    "bogus = 1", "eps = -1", "just words", "N_ladder = 10",
])
def test_invalid(text):
    with pytest.raises(UsageError):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(UsageError):
        load_config(tmp_path / "missing.cfg")


def test_digest_ignores_output():
    a = ExperimentConfig()
    assert a.digest() == a.with_output("elsewhere").digest()
    assert a.digest() != ExperimentConfig(seed=1).digest()
