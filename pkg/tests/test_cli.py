import csv
import io
import json

import pytest

from logdiv import __version__
from logdiv.duality import bregman_divergence, l_divergence
from logdiv.main import main

SIMPLEX = {"name": "simplex-F-alpha", "dim": 2, "alpha": 1.0}
SMALL_SIZES = {"pairs": 3, "points": 2, "triples": 2, "reconstruct_pairs": 2}


@pytest.fixture
def write_config(tmp_path):
    def _write(data, name="run.json"):
        path = tmp_path / name
        path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
        return str(path)
    return _write


def _csv_rows(text):
    return list(csv.reader(io.StringIO(text)))


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def test_eval_on_the_diagonal(write_config, capsys):
    path = write_config({"potential": SIMPLEX, "pairs": [[[0.2, 0.1], [0.2, 0.1]]]})
    assert main(["eval", "--config", path]) == 0
    record = json.loads(capsys.readouterr().out)
    result = record["results"][0]
    assert result["divergence"] == 0.0
    assert abs(result["fenchel_gap"]) < 1e-14
    assert record["order"] == "D^(+1)"


def test_eval_matches_the_library(write_config, capsys, simplex_phi):
    x, xp = [0.4, -0.2], [-0.1, 0.3]
    path = write_config({"potential": SIMPLEX, "pairs": [[x, xp]]})
    assert main(["eval", "--config", path]) == 0
    result = json.loads(capsys.readouterr().out)["results"][0]
    assert result["divergence"] == l_divergence(simplex_phi, x, xp)
    assert result["bregman"] == bregman_divergence(simplex_phi, x, xp)


def test_eval_malformed_json(write_config, capsys):
    path = write_config("{not json")
    assert main(["eval", "--config", path]) == 1
    assert capsys.readouterr().err.startswith("logdiv eval: JSONDecodeError:")


def test_eval_unknown_key(write_config, capsys):
    path = write_config({"potential": SIMPLEX, "pairz": []})
    assert main(["eval", "--config", path]) == 1
    assert "ValidationError" in capsys.readouterr().err


def test_eval_without_pairs_is_a_config_error(write_config, capsys):
    path = write_config({"potential": SIMPLEX})
    assert main(["eval", "--config", path]) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_eval_convex_far_pair(write_config, capsys):
    barrier = {"name": "log-barrier-on-quadrant", "dim": 2, "alpha": 0.5, "sign": "convex"}
    path = write_config({"potential": barrier, "pairs": [[[5.0, 5.0], [1.0, 1.0]]]})
    assert main(["eval", "--config", path]) == 2
    assert "LogDomainError" in capsys.readouterr().err


def test_eval_writes_to_out(write_config, tmp_path, capsys):
    path = write_config({"potential": SIMPLEX, "pairs": [[[0.2, 0.1], [0.0, 0.0]]]})
    out = tmp_path / "result.csv"
    assert main(["eval", "--config", path, "--format", "csv", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    rows = _csv_rows(out.read_text(encoding="utf-8"))
    assert rows[0] == ["pair", "divergence", "bregman", "fenchel_gap", "eta_1", "eta_2"]
    assert len(rows) == 2
    assert float(rows[1][1]) > 0.0


# ---------------------------------------------------------------------------
# geodesic
# ---------------------------------------------------------------------------

def test_geodesic_csv(write_config, capsys):
    geo = {"start": [0.0, 0.0], "end": [0.6, -0.3], "n_samples": 9}
    path = write_config({"potential": SIMPLEX, "geodesic": geo})
    assert main(["geodesic", "--config", path, "--format", "csv"]) == 0
    rows = _csv_rows(capsys.readouterr().out)
    assert rows[0][:2] == ["t", "h"]
    assert rows[0][-1] == "rk4_deviation"
    assert len(rows) == 1 + 9
    assert float(rows[1][0]) == 0.0 and float(rows[1][1]) == 0.0
    assert float(rows[-1][0]) == 1.0 and float(rows[-1][1]) == 1.0


def test_bregman_geodesic_is_uniform(write_config, capsys):
    quad = {"name": "quadratic", "dim": 2, "alpha": 0.0}
    geo = {"start": [-1.0, 0.5], "end": [1.5, 2.0], "n_samples": 5}
    path = write_config({"potential": quad, "geodesic": geo})
    assert main(["geodesic", "--config", path]) == 0
    record = json.loads(capsys.readouterr().out)
    assert max(abs(h - t) for h, t in zip(record["h"], record["t"])) < 1e-12
    assert record["rk4_max_deviation"] < 1e-10


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def test_report_is_byte_identical(write_config, tmp_path):
    cfg = {"suites": ["fenchel", "renyi", "alpha-divergence"], "sizes": SMALL_SIZES, "seed": 5}
    path = write_config(cfg)
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["report", "--config", path, "--out", str(first)]) == 0
    assert main(["report", "--config", path, "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    record = json.loads(first.read_text(encoding="utf-8"))
    assert record["seed"] == 5
    assert record["passed"] is True


def test_report_failure_exit_code(write_config, capsys):
    path = write_config({"suites": ["fenchel"], "sizes": SMALL_SIZES})
    assert main(["report", "--config", path, "--tol", "fenchel=-1"]) == 3
    captured = capsys.readouterr()
    # the report is written before the failure is signalled
    assert json.loads(captured.out)["passed"] is False
    assert "SuiteFailure" in captured.err


def test_bad_tol_value(write_config, capsys):
    path = write_config({"suites": ["fenchel"], "sizes": SMALL_SIZES})
    assert main(["report", "--config", path, "--tol", "fenchel=abc"]) == 1
    assert "ConfigError" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_command_is_required(capsys):
    assert main([]) == 1
    assert capsys.readouterr().err.splitlines()[-1].startswith("logdiv: ConfigError:")


def test_malformed_option_is_a_usage_error(capsys):
    assert main(["eval", "--seed", "abc"]) == 1
    err = capsys.readouterr().err
    assert "ConfigError" in err
    assert "invalid int value" in err


def test_unknown_command_is_a_usage_error(capsys):
    assert main(["no-such-command"]) == 1
    assert "ConfigError" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Remaining commands
# ---------------------------------------------------------------------------

SIMPLEX_FAMILY = {"sample_points": 3, "mu": [1.0, 1.0, 1.0], "h": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
                  "alpha": 1.0, "family_sign": "+"}


def test_conjugate_command(write_config, capsys):
    path = write_config({"potential": SIMPLEX, "points": [[0.0, 0.0]],
                         "grid": [[0.0, 0.0], [0.1, 0.1], [-3.0, 0.0]]})
    assert main(["conjugate", "--config", path]) == 0
    result = json.loads(capsys.readouterr().out)["results"][0]
    assert abs(result["psi"] - 1.0986122886681098) < 1e-12
    assert result["search_index"] == 0
    assert result["skipped"] == 1


def test_curvature_command(write_config, capsys):
    path = write_config({"potential": SIMPLEX, "points": [[0.2, -0.1], [0.0, 0.3]]})
    assert main(["curvature", "--config", path]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["expected_curvature"] == -1.0
    assert record["exponential_class_ok"] is True
    assert all(abs(r["fitted"] + 1.0) < 1e-8 for r in record["results"])


def test_pythagoras_command(write_config, capsys):
    triples = [{"p": [0.3, 0.1], "q": [0.0, 0.2], "direction": [1.0, 1.0]},
               {"p": [0.3, 0.1], "q": [0.0, 0.2], "r": [0.1, 0.1]}]
    path = write_config({"potential": SIMPLEX, "triples": triples})
    assert main(["pythagoras", "--config", path]) == 0
    results = json.loads(capsys.readouterr().out)["results"]
    assert results[0]["constructed"] is True
    assert abs(results[0]["relative_gap"]) < 1e-9
    assert results[1]["constructed"] is False


def test_renyi_command(write_config, capsys):
    path = write_config({"family": SIMPLEX_FAMILY, "pairs": [[[0.1, 0.0], [0.0, 0.2]]]})
    assert main(["renyi", "--config", path]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["case"] == "plus"
    assert record["order"] == 2.0
    assert record["max_gap"] < 1e-10


def test_reconstruct_command(write_config, capsys):
    path = write_config({"potential": SIMPLEX, "base": [0.0, 0.0],
                         "pairs": [[[0.5, 0.2], [-0.1, 0.3]]]})
    assert main(["reconstruct", "--config", path]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["max_gap"] < 1e-7
    assert record["closedness"] < 1e-5


def test_reconstruct_refuses_the_bregman_limit(write_config, capsys):
    quad = {"name": "quadratic", "dim": 2, "alpha": 0.0}
    path = write_config({"potential": quad, "base": [0.0, 0.0], "pairs": [[[1.0, 0.0], [0.0, 0.0]]]})
    assert main(["reconstruct", "--config", path]) == 1
    assert "ConfigError" in capsys.readouterr().err
