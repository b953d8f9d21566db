import csv
import json

import pytest

from randzeta.cli import EXIT_CAPACITY, EXIT_CHECK, EXIT_CONFIG, EXIT_OK, read_config, run


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sieve(tmp_path):
    assert run(["sieve", "--log-limit", "4", "--output-dir", str(tmp_path)]) == EXIT_OK
    r = rows(tmp_path / "sieve.csv")
    assert len(r) == 16 and r[0]["p"] == "2" and r[-1]["p"] == "53"
    doc = json.loads((tmp_path / "sieve.json").read_text())
    assert doc["config"]["log_limit"] == 4.0
    assert doc["summary"]["n_primes"] == 16
    assert doc["passed"] is True
    assert {"version", "wall_time_s", "timestamp", "checks"} <= set(doc)


def test_ballot_single_step(tmp_path):
    argv = ["ballot", "--n", "1", "--a", "1", "--b", "0", "--delta", "1", "--method", "dp", "--output-dir", str(tmp_path)]
    assert run(argv) == EXIT_OK
    (row,) = rows(tmp_path / "ballot.csv")
    assert float(row["estimate"]) == pytest.approx(0.4553, abs=1e-3)
    assert row["method"] == "dp"


def test_unknown_flag(tmp_path, capsys):
    assert run(["ballot", "--bogus", "1", "--output-dir", str(tmp_path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "usage" in err and "--bogus" in err


def test_unknown_command():
    assert run(["frobnicate"]) == EXIT_CONFIG


def test_bad_value_names_parameter(capsys):
    assert run(["sieve", "--log-limit", "four"]) == EXIT_CONFIG
    assert "--log-limit" in capsys.readouterr().err


def test_seed_required(capsys):
    assert run(["verify-tilt", "--replicates", "100"]) == EXIT_CONFIG
    assert "--seed" in capsys.readouterr().err
    assert run(["ballot", "--n", "4", "--method", "mc"]) == EXIT_CONFIG


def test_capacity_error(tmp_path):
    assert run(["verify-covariance", "--k-max", "5", "--seed", "1", "--output-dir", str(tmp_path)]) == EXIT_CAPACITY
    assert run(["max", "--n", "6", "--seed", "1", "--output-dir", str(tmp_path)]) == EXIT_CAPACITY


def test_failed_check_exit_code(tmp_path):
    argv = ["ballot", "--n", "16,32", "--scaling-tol", "0", "--output-dir", str(tmp_path)]
    assert run(argv) == EXIT_CHECK
    doc = json.loads((tmp_path / "ballot.json").read_text())
    assert doc["passed"] is False and doc["checks"]["n32_scaling"] is False


def test_byte_identical_rerun(tmp_path):
    argv = ["verify-tilt", "--k", "2", "--replicates", "3000", "--seed", "9", "--workers", "1"]
    assert run(argv + ["--output-dir", str(tmp_path / "a")]) == EXIT_OK
    assert run(argv + ["--output-dir", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "verify-tilt.csv").read_bytes() == (tmp_path / "b" / "verify-tilt.csv").read_bytes()


def test_workers_do_not_change_results(tmp_path):
    argv = ["verify-tilt", "--k", "2", "--replicates", "5000", "--seed", "9"]
    run(argv + ["--workers", "1", "--output-dir", str(tmp_path / "a")])
    run(argv + ["--workers", "2", "--output-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "verify-tilt.csv").read_bytes() == (tmp_path / "b" / "verify-tilt.csv").read_bytes()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# ballot run\nns = 1\na = 1\nb = 0\ndelta = 2   # wide window\nmethod = dp\n")
    assert read_config(cfg)["delta"] == "2"
    assert run(["ballot", "--config", str(cfg), "--delta", "1", "--output-dir", str(tmp_path)]) == EXIT_OK
    (row,) = rows(tmp_path / "ballot.csv")
    assert float(row["estimate"]) == pytest.approx(0.4553, abs=1e-3)
    doc = json.loads((tmp_path / "ballot.json").read_text())
    assert doc["config"]["delta"] == 1.0 and doc["config"]["ns"] == [1]


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 3\n")
    assert run(["ballot", "--config", str(bad)]) == EXIT_CONFIG
    bad.write_text("no equals sign\n")
    assert run(["ballot", "--config", str(bad)]) == EXIT_CONFIG
    assert run(["ballot", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RANDZETA_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(["sieve", "--log-limit", "3", "--name", "small"]) == EXIT_OK
    assert (tmp_path / "env" / "small.csv").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["verify-covariance", "--k-max", "1", "--replicates", "2000", "--seed", "1"],
        ["verify-cgf", "--ks", "1", "--lams", "1", "--replicates", "2000", "--seed", "1"],
        ["max", "--n", "2", "--g", "6", "--replicates", "50", "--seed", "1"],
        ["brw-max", "--depths", "4,6,8", "--replicates", "200", "--top-levels", "-1", "--bootstrap", "5",
         "--beta-range=-100,100", "--iid-beta-range=-100,100", "--alpha-tol", "100", "--seed", "1"],
        ["exceedances", "--n", "2", "--g", "6", "--replicates", "200", "--pilot-replicates", "100", "--seed", "1"],
        ["oscillation", "--k", "2", "--n", "2", "--g", "8", "--replicates", "200", "--seed", "1"],
        ["compare-gaussian", "--k", "1", "--replicates", "10000", "--seed", "1"],
        ["joint", "--replicates", "2000", "--seed", "1"],
    ],
)
def test_every_subcommand_runs(tmp_path, argv):
    code = run(argv + ["--output-dir", str(tmp_path)])
    assert code in (EXIT_OK, EXIT_CHECK)
    doc = json.loads((tmp_path / f"{argv[0]}.json").read_text())
    assert doc["command"] == argv[0]
    assert rows(tmp_path / f"{argv[0]}.csv")
