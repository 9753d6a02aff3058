"""File formats and the command-line front end (exit codes, reports, replay)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from grassmann_scatter import DomainError, Empirical
from grassmann_scatter.cli import main
from grassmann_scatter.io import (
    read_matrix_csv,
    read_measure_json,
    read_scatter_csv,
    to_jsonable,
    write_matrix_csv,
    write_measure_json,
)
from helpers import (
    gaussian_points,
    lines_measure,
    orthogonal_lines,
    planar_lines_in_3d,
    random_measure,
    three_symmetric_lines,
)


def write_dataset(path, meas):
    write_measure_json(path, meas)
    return str(path)


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# file formats


def test_matrix_csv_round_trip(tmp_path):
    rng = np.random.default_rng(201)
    M = rng.standard_normal((3, 4))
    path = tmp_path / "m.csv"
    write_matrix_csv(path, M)
    assert np.array_equal(read_matrix_csv(path), M)


def test_matrix_csv_single_row_is_two_dimensional(tmp_path):
    path = tmp_path / "row.csv"
    path.write_text("1.0,2.0,3.0\n")
    assert read_matrix_csv(path).shape == (1, 3)


def test_matrix_csv_malformed_raises(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\n3.0,oops\n")
    with pytest.raises(DomainError):
        read_matrix_csv(path)


def test_scatter_csv_validates_the_matrix(tmp_path):
    good = tmp_path / "good.csv"
    write_matrix_csv(good, np.diag([2.0, 0.5]))
    assert np.allclose(read_scatter_csv(good), np.diag([2.0, 0.5]))
    for name, M in (("indef.csv", np.diag([1.0, -1.0])), ("det.csv", np.diag([2.0, 1.0]))):
        path = tmp_path / name
        write_matrix_csv(path, M)
        with pytest.raises(DomainError):
            read_scatter_csv(path)


def test_measure_json_round_trip(tmp_path):
    meas = random_measure(np.random.default_rng(202), 3, 2, 5, uniform=False)
    path = tmp_path / "data.json"
    write_measure_json(path, meas)
    back = read_measure_json(path)
    assert back.m == 3 and back.r == 2 and back.n == 5
    assert np.array_equal(back.points, meas.points)
    assert np.array_equal(back.weights, meas.weights)


def test_measure_json_errors(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{this is not json")
    with pytest.raises(DomainError):
        read_measure_json(bad_json)

    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"m": 2, "points": [[[1.0], [0.0]]]}))
    with pytest.raises(DomainError):
        read_measure_json(missing)

    shape = tmp_path / "shape.json"
    shape.write_text(json.dumps({"m": 3, "r": 1, "points": [[[1.0], [0.0]]]}))
    with pytest.raises(DomainError):
        read_measure_json(shape)

    deficient = tmp_path / "deficient.json"
    deficient.write_text(
        json.dumps({"m": 3, "r": 2, "points": [[[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]]})
    )
    with pytest.raises(DomainError):
        read_measure_json(deficient)


def test_to_jsonable_handles_arrays_and_dataclasses():
    import dataclasses

    @dataclasses.dataclass
    class Box:
        val: float
        arr: np.ndarray

    doc = to_jsonable({"box": Box(np.float64(1.5), np.eye(2)), "t": (1, np.int64(2))})
    assert json.loads(json.dumps(doc)) == {
        "box": {"val": 1.5, "arr": [[1.0, 0.0], [0.0, 1.0]]},
        "t": [1, 2],
    }


# ---------------------------------------------------------------------------
# estimate command


def test_cli_estimate_three_lines_gives_identity(tmp_path):
    data = write_dataset(tmp_path / "lines.json", three_symmetric_lines())
    out = tmp_path / "out"
    assert main(["estimate", "--input", data, "--out", str(out)]) == 0
    estimate = read_matrix_csv(out / "estimate.csv")
    assert np.max(np.abs(estimate - np.eye(2))) <= 1e-8
    report = load_json(out / "report.json")
    assert report["status"] == "converged"
    assert report["residual"] <= 1e-12
    assert (report["m"], report["r"], report["n"]) == (2, 1, 3)
    assert report["iterations"] >= 0 and len(report["trace"]) >= 1
    assert (out / "replay.json").exists()


def test_cli_estimate_descent_solver(tmp_path):
    data = write_dataset(tmp_path / "lines.json", three_symmetric_lines())
    out = tmp_path / "out"
    assert main(["estimate", "--input", data, "--solver", "descent", "--out", str(out)]) == 0
    assert load_json(out / "report.json")["status"] == "converged"


def test_cli_estimate_with_start_scatter(tmp_path):
    data = write_dataset(tmp_path / "lines.json", three_symmetric_lines())
    start = tmp_path / "start.csv"
    write_matrix_csv(start, np.diag([2.0, 0.5]))
    out = tmp_path / "out"
    assert main(["estimate", "--input", data, "--start", str(start), "--out", str(out)]) == 0
    assert np.max(np.abs(read_matrix_csv(out / "estimate.csv") - np.eye(2))) <= 1e-5


def test_cli_estimate_planar_data_exits_2_with_witness(tmp_path, capsys):
    data = write_dataset(tmp_path / "planar.json", planar_lines_in_3d(np.random.default_rng(42)))
    out = tmp_path / "out"
    assert main(["estimate", "--input", data, "--out", str(out)]) == 2
    assert "error:" in capsys.readouterr().err
    report = load_json(out / "report.json")
    assert report["status"] == "no_ge"
    assert report["witness"] is not None
    W = np.asarray(report["witness"])
    assert W.shape[0] == 3 and np.linalg.matrix_rank(W) == 2
    assert not (out / "estimate.csv").exists()


def test_cli_estimate_budget_exhausted_exits_4(tmp_path):
    meas = random_measure(np.random.default_rng(203), 2, 1, 6)
    data = write_dataset(tmp_path / "data.json", meas)
    out = tmp_path / "out"
    code = main(["estimate", "--input", data, "--max-iter", "1", "--tol", "1e-16",
                 "--out", str(out)])
    assert code == 4
    assert load_json(out / "report.json")["status"] not in ("converged", "no_ge")


def test_cli_estimate_malformed_inputs_exit_3(tmp_path, capsys):
    bad_csv = tmp_path / "start.csv"
    bad_csv.write_text("1.0,2.0\n3.0,oops\n")
    data = write_dataset(tmp_path / "lines.json", three_symmetric_lines())
    out = tmp_path / "out"
    assert main(["estimate", "--input", data, "--start", str(bad_csv), "--out", str(out)]) == 3
    assert "error:" in capsys.readouterr().err

    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{nope")
    assert main(["estimate", "--input", str(bad_json), "--out", str(out)]) == 3

    missing = tmp_path / "does-not-exist.json"
    assert main(["estimate", "--input", str(missing), "--out", str(out)]) == 3


# ---------------------------------------------------------------------------
# diagnose command


def test_cli_diagnose_exit_codes_cover_the_trichotomy(tmp_path):
    rng = np.random.default_rng(8)
    cases = [
        (Empirical(gaussian_points(rng, np.eye(3), 2, 60)), 0),   # unique
        (orthogonal_lines(), 1),                                  # limit
        (planar_lines_in_3d(np.random.default_rng(44)), 2),       # no estimate
        (lines_measure([0.0, np.pi / 2, np.pi / 4],
                       weights=[0.5, 0.25, 0.25]), 4),            # inconclusive
    ]
    for k, (meas, expected) in enumerate(cases):
        data = write_dataset(tmp_path / f"case{k}.json", meas)
        out = tmp_path / f"out{k}"
        assert main(["diagnose", "--input", data, "--out", str(out)]) == expected
        report = load_json(out / "report.json")
        assert "verdict" in report and "min_index" in report
        assert report["unique_sample_threshold"] == pytest.approx(
            meas.m**2 / (meas.r * (meas.m - meas.r))
        )


def test_cli_diagnose_limit_report_details(tmp_path):
    data = write_dataset(tmp_path / "ortho.json", orthogonal_lines())
    out = tmp_path / "out"
    assert main(["diagnose", "--input", data, "--out", str(out)]) == 1
    report = load_json(out / "report.json")
    assert report["verdict"] == "limit"
    assert report["complement_ok"] is True
    assert report["min_index"] == pytest.approx(0.0, abs=1e-12)
    assert len(report["zeros"]) >= 2
    assert report["witness"]["dim"] == 1
    assert report["scanned"] >= 2 and report["truncated"] is False


# ---------------------------------------------------------------------------
# experiment commands


def test_cli_lln_low_power_and_non_monotone_warn(tmp_path):
    out = tmp_path / "out"
    code = main(["lln", "--m", "2", "--r", "1", "--ns", "40,41", "--reps", "2",
                 "--seed", "1", "--out", str(out)])
    assert code == 0
    doc = load_json(out / "lln.json")
    assert any(w.startswith("LOW_POWER") for w in doc["warnings"])
    assert any(w.startswith("WARN") for w in doc["warnings"])
    assert doc["ns"] == [40, 41] and doc["threads"] == 1
    assert len(doc["medians"]) == 2 and len(doc["quartiles"]) == 2
    assert read_matrix_csv(out / "distances.csv").shape == (2, 2)  # replicate rows


def test_cli_clt_low_power_smoke(tmp_path):
    out = tmp_path / "out"
    code = main(["clt", "--m", "2", "--r", "1", "--n", "80", "--reps", "10",
                 "--seed", "3", "--ref-mc", "2000", "--out", str(out)])
    assert code == 0
    doc = load_json(out / "clt.json")
    assert any(w.startswith("LOW_POWER") for w in doc["warnings"])
    assert doc["n"] == 80 and doc["reps"] == 10
    assert read_matrix_csv(out / "cov.csv").shape == (4, 4)
    assert read_matrix_csv(out / "ref.csv").shape == (4, 4)
    assert (out / "replay.json").exists()


def test_cli_gradcheck_default_seed_passes(tmp_path):
    out = tmp_path / "out"
    assert main(["gradcheck", "--m", "3", "--trials", "5", "--out", str(out)]) == 0
    doc = load_json(out / "gradcheck.json")
    assert doc["passed"] is True
    assert set(doc["max_errors"]) == {
        "first_order", "second_order", "norm_gradient", "ray_normalization",
    }
    for key, tol in doc["tolerances"].items():
        assert doc["max_errors"][key] <= tol
    assert len(doc["rows"]) == 2 * 5  # both ranks, five trials each


# ---------------------------------------------------------------------------
# replay, threading, and argument errors


def test_cli_replay_file_reproduces_outputs_bit_for_bit(tmp_path):
    argv = ["lln", "--m", "2", "--r", "1", "--ns", "30,60", "--reps", "3", "--seed", "9"]
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert main(argv + ["--out", str(out1)]) == 0
    assert main(argv + ["--out", str(out2)]) == 0
    assert (out1 / "lln.json").read_bytes() == (out2 / "lln.json").read_bytes()
    assert (out1 / "distances.csv").read_bytes() == (out2 / "distances.csv").read_bytes()

    # rebuild the command line from the recorded replay config alone
    opts = load_json(out1 / "replay.json")["options"]
    out3 = tmp_path / "run3"
    rebuilt = [
        "lln",
        "--m", str(opts["m"]),
        "--r", str(opts["r"]),
        "--ns", ",".join(str(n) for n in opts["ns"]),
        "--reps", str(opts["reps"]),
        "--seed", str(opts["seed"]),
        "--tol", str(opts["tol"]),
        "--max-iter", str(opts["max_iter"]),
        "--damping", str(opts["damping"]),
        "--out", str(out3),
    ]
    assert main(rebuilt) == 0
    assert (out3 / "distances.csv").read_bytes() == (out1 / "distances.csv").read_bytes()
    assert (out3 / "lln.json").read_bytes() == (out1 / "lln.json").read_bytes()


def test_cli_threads_env_var_and_flag_precedence(tmp_path, monkeypatch):
    argv = ["lln", "--m", "2", "--r", "1", "--ns", "30", "--reps", "2", "--seed", "4"]
    out1 = tmp_path / "env"
    monkeypatch.setenv("GRASSMANN_SCATTER_THREADS", "2")
    assert main(argv + ["--out", str(out1)]) == 0
    doc = load_json(out1 / "lln.json")
    assert doc["threads"] == 2

    out2 = tmp_path / "flag"
    assert main(argv + ["--threads", "1", "--out", str(out2)]) == 0
    assert load_json(out2 / "lln.json")["threads"] == 1
    # worker count must not change the numbers
    assert load_json(out1 / "lln.json")["medians"] == load_json(out2 / "lln.json")["medians"]

    monkeypatch.setenv("GRASSMANN_SCATTER_THREADS", "abc")
    assert main(argv + ["--out", str(tmp_path / "bad")]) == 3


def test_cli_argument_errors_exit_3(tmp_path, capsys):
    assert main(["estimate", "--bogus-flag"]) == 3
    assert main(["no-such-command"]) == 3
    assert main(["lln", "--r", "1"]) == 3          # neither --sigma nor --m
    capsys.readouterr()


def test_cli_module_entry_point_subprocess(tmp_path):
    data = write_dataset(tmp_path / "ortho.json", orthogonal_lines())
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "grassmann_scatter.cli",
         "diagnose", "--input", data, "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert "limit" in proc.stdout
