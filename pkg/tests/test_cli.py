import json
import os
import subprocess
import sys

import pytest

from eulerchaos.cli import build_parser, main
from eulerchaos.experiments import build_id


def run(*args, env=None):
    return subprocess.run([sys.executable, "-m", "eulerchaos", *args], capture_output=True, env=env)


def test_sieve_lists_primes():
    res = run("sieve", "--limit", "100")
    assert res.returncode == 0
    lines = res.stdout.decode().split()
    assert len(lines) == 25 and lines[0] == "2" and lines[-1] == "97"


def test_missing_config_is_usage_error(tmp_path):
    res = run("experiment", "--config", str(tmp_path / "missing.cfg"))
    assert res.returncode == 2 and b"missing.cfg" in res.stderr and res.stdout == b""


def test_field_deterministic_bytes():
    args = ("field", "--limit", "10", "--grid", "8", "--kind", "phase", "--seed", "7")
    a, b = run(*args), run(*args)
    assert a.returncode == 0 and a.stdout == b.stdout
    assert a.stdout.decode().splitlines()[0] == "x,total" and len(a.stdout.decode().splitlines()) == 10
    assert b"coarser" in a.stderr


def test_domain_error_exit_code(capsys):
    assert main(["sieve", "--limit", "1"]) == 1
    assert "limit" in capsys.readouterr().err


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sieve", "--limit", "10", "--nope"])
    assert exc.value.code == 2


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert capsys.readouterr().out.strip() == build_id()


def test_every_subcommand_has_help_and_common_flags():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {"sieve", "sample", "field", "observables", "bridge", "cov-report", "experiment", "resume"}
    for name, sp in sub.choices.items():
        opts = {o for a in sp._actions for o in a.option_strings}
        assert {"--seed", "--out", "--threads", "-h"} <= opts, name
        assert sp.format_help()


def test_data_commands(tmp_path, capsys):
    out = tmp_path / "obs.csv"
    assert main(["observables", "--limit", "1000", "--alpha", "0.5", "1", "--realizations", "5", "--R", "exp(e)", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "seed,kind,r,alpha,N,W,M,max_val,W_gt_k1" and len(lines) == 11
    assert main(["observables", "--limit", "1000", "--expected-w", "inversion"]) == 0
    assert "inversion" in capsys.readouterr().out
    assert main(["sample", "--limit", "30", "--kind", "gaussian", "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "p,w1,w2"
    assert main(["field", "--limit", "1000", "--format", "binary", "--out", str(tmp_path / "f.bin")]) == 0
    assert main(["field", "--limit", "1000", "--format", "binary"]) == 2
    assert main(["bridge", "crossing", "--paths", "200", "--steps", "16", "64", "--out", str(tmp_path / "b.csv")]) == 0
    assert len((tmp_path / "b.csv").read_text().splitlines()) == 3
    assert main(["bridge", "decompose", "--limit", "10000", "--realizations", "50", "--out", str(tmp_path / "d.csv")]) == 0
    assert main(["bridge", "decompose", "--limit", "10000", "--R", "100"]) == 1
    assert main(["cov-report", "--limit", "10000", "--x2", "0.1", "--realizations", "50", "--out", str(tmp_path / "c.csv")]) == 0
    assert (tmp_path / "c.csv").read_text().startswith("k,delta,regime")


def test_experiment_and_resume(tmp_path, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text("alphas = 1.0\nN_ladder = 10^3, 2000, 4000\nkinds = phase\nrealizations = 100\nrealizations_at =\n"
                   "w_hat_samples = 2000\nw_hat_check_samples = 10000\nbootstrap_resamples = 50\n"
                   f"output_dir = {tmp_path / 'from_cfg'}\n")
    env_out = tmp_path / "from_env"
    os.environ["EULERCHAOS_OUT"] = str(env_out)
    try:
        assert main(["experiment", "--config", str(cfg), "--threads", "2"]) == 0
    finally:
        del os.environ["EULERCHAOS_OUT"]
    manifest = json.loads((env_out / "manifest.json").read_text())
    assert manifest["build"] == build_id() and not (tmp_path / "from_cfg").exists()
    cell = env_out / "cells" / "phase_N2000_a1.0.csv"
    full = cell.read_bytes()
    cell.write_bytes(full[:-40])
    assert main(["resume", "--out", str(env_out)]) == 0
    assert cell.read_bytes() == full
    assert main(["resume", "--out", str(tmp_path / "nothing")]) == 2
