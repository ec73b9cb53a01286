import csv
import math
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from landis.cli import main
from landis.config import COMMANDS, ExperimentConfig, parse, serialize
from landis.errors import ConfigParse

CONFIGS = Path(__file__).resolve().parents[1] / "configs" / "acceptance"

finite = st.floats(-1e6, 1e6, allow_nan=False)
run_values = {
    "x_lo": finite, "kappa": finite, "tol": st.floats(1e-14, 1.0),
    "x0": st.lists(finite, min_size=1, max_size=4).map(tuple),
    "seeds": st.lists(st.integers(0, 10**6), min_size=1, max_size=5).map(tuple),
    "grid_n": st.integers(2, 10**6), "method": st.sampled_from(["RK45", "DOP853"]),
    "grid": st.tuples(st.integers(1, 999), st.integers(1, 999)),
}


@settings(max_examples=60)
@given(
    profile=st.sampled_from(["constant", "smooth_random"]),
    seed=st.integers(0, 10**6),
    params=st.dictionaries(st.sampled_from(["a", "q", "v", "x_hi", "breakpoints"]),
                           finite | st.lists(finite, min_size=1, max_size=3).map(tuple), max_size=3),
    run=st.fixed_dictionaries({"command": st.sampled_from(COMMANDS)},
                              optional=run_values),
    directory=st.from_regex(r"[a-z][a-z0-9_/]{0,12}", fullmatch=True),
)
def test_config_roundtrip(profile, seed, params, run, directory):
    cfg = ExperimentConfig(profile, seed, params, run, {"directory": directory})
    assert parse(serialize(cfg)) == cfg


def test_unknown_key_and_section():
    with pytest.raises(ConfigParse, match="fields"):
        parse("[fields]\nprofile = constant\n")
    with pytest.raises(ConfigParse, match="colour"):
        parse("[run]\ncommand = rates\ncolour = red\n")
    with pytest.raises(ConfigParse, match="launch"):
        parse("[run]\ncommand = launch\n")


def test_seed_range_grammar():
    assert parse("[run]\nseeds = 3:6\n").run["seeds"] == (3, 4, 5)
    assert parse("[run]\nseeds = 1, 4\n").run["seeds"] == (1, 4)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_rates_command(tmp_path):
    code = main(["--profile", "constant", "--param", "v=-1", "--out", str(tmp_path), "rates"])
    assert code == 0
    (row,) = _rows(tmp_path / "rates.csv")
    assert float(row["kappa"]) == 1.0
    assert list(row) == ["beta", "gamma", "kappa", "lambda", "case", "kappa_limsup", "kappa_abg"]
    assert (tmp_path / "report.txt").read_text().count("pass") == 1


def test_malformed_config_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\ncommand = rates\nfields = 3\n")
    assert main(["--config", str(bad)]) == 1
    assert "fields" in capsys.readouterr().err


def test_missing_command_exit_1(tmp_path):
    assert main(["--out", str(tmp_path)]) == 1


def test_failed_check_exit_2(tmp_path):
    code = main(["--out", str(tmp_path), "--param", "v=-1", "barrier", "--n-dim", "1",
                 "--delta", "20", "--grid", "60x60"])
    assert code == 2
    assert "subsolution: fail" in (tmp_path / "report.txt").read_text()


def test_solve_csv_format(tmp_path):
    assert main(["--out", str(tmp_path), "--param", "x_hi=5", "solve", "--du0", "-1"]) == 0
    text = (tmp_path / "trajectory.csv").read_bytes()
    assert b"\r" not in text
    header, first = text.decode().splitlines()[:2]
    assert header == "x,u,du,env"
    assert first.split(",")[:3] == ["0", "1", "-1"]
    assert (tmp_path / "envelope.dat").exists()


def test_demo_bessel_envelopes(tmp_path):
    assert main(["--out", str(tmp_path), "demo-bessel"]) == 0
    rows = {float(r["r"]): r for r in _rows(tmp_path / "bessel.csv")}
    assert float(rows[4.0]["env_3d"]) == pytest.approx(0.25, rel=1e-5)
    assert float(rows[10.0]["env_3d"]) / float(rows[1.0]["env_3d"]) == pytest.approx(0.1, rel=1e-5)
    assert all(abs(float(r["env_1d"]) - 1) < 1e-6 for r in rows.values())


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text((CONFIGS / "eigen.ini").read_text())
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o"), "--radii", "5,10"]) == 0
    assert len(_rows(tmp_path / "o" / "eigen.csv")) == 2
    (lim,) = _rows(tmp_path / "o" / "eigen_limit.csv")
    assert math.isfinite(float(lim["lambda_inf"]))


def test_parallel_batch_matches_serial(tmp_path):
    args = ["--profile", "smooth_random", "uci-check", "--seeds", "0:4", "--x0", "1,5"]
    assert main(["--out", str(tmp_path / "a"), *args, "--workers", "1"]) == 0
    assert main(["--out", str(tmp_path / "b"), *args, "--workers", "2"]) == 0
    assert (tmp_path / "a" / "uci.csv").read_bytes() == (tmp_path / "b" / "uci.csv").read_bytes()
