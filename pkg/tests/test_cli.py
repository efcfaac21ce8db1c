import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from umwave.cli import GRADCHECK_STEPS, bench_rows, gradcheck, main, read_waveform, write_waveform
from umwave.manifold import ProductPoint
from umwave.scenario import load_scenario

from conftest import SCENARIOS

SMALL = {
    "m_antennas": 3,
    "n_samples": 12,
    "angle_spacing_deg": 2.0,
    "interest_angles_deg": [-40.0, 30.0],
    "delay_max": 3,
    "mainlobes": [{"center_deg": -40.0, "half_width_deg": 10.0}, {"center_deg": 30.0, "half_width_deg": 10.0}],
    "weight_wc": 25.0,
    "seed": 11,
    "solver": {"algorithm": "um-agd", "t_bar": 1e-3, "max_iters": 40, "step_size": 1e-4, "t0": 1e-5},
}


def write_scenario(path, **changes):
    raw = json.loads(json.dumps(SMALL))
    solver = changes.pop("solver", {})
    raw.update(changes)
    raw["solver"].update(solver)
    path.write_text(json.dumps(raw))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def small(tmp_path):
    return write_scenario(tmp_path / "small.json")


@pytest.fixture(scope="module")
def normal_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("normal") / "out"
    code = main(["design", str(SCENARIOS / "normal.json"), "--out", str(out), "--deterministic"])
    return code, out


class TestDesign:
    def test_normal_scale_outputs(self, normal_run):
        code, out = normal_run
        assert code == 0
        names = {p.name for p in out.iterdir()}
        assert names == {"history.csv", "waveform.csv", "beampattern.csv", "correlation.csv", "manifest.json"}
        rows = read_rows(out / "history.csv")
        assert rows[0] == ["iter", "epoch", "f", "e", "P", "grad_norm", "step", "grad_units", "wall_ns"]
        f = np.array([float(r[2]) for r in rows[1:]])
        assert len(f) == 2001
        assert np.all(np.diff(f) <= 0)

    def test_manifest(self, normal_run):
        _, out = normal_run
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["solver"]["algorithm"] == "um-agd"
        assert doc["seed"] == 0 and doc["status"] == "max_iters"
        assert doc["config"]["delay_set"] == list(range(17))

    def test_table_sizes(self, normal_run):
        _, out = normal_run
        assert len(read_rows(out / "beampattern.csv")) == 1 + 1799
        assert len(read_rows(out / "correlation.csv")) == 1 + 4 * 17

    def test_evaluate_round_trip(self, normal_run, capsys):
        _, out = normal_run
        last = read_rows(out / "history.csv")[-1]
        capsys.readouterr()
        code = main(["evaluate", str(SCENARIOS / "normal.json"), "--waveform", str(out / "waveform.csv")])
        assert code == 0
        got = json.loads(capsys.readouterr().out)
        for key, col in (("f", 2), ("e", 3), ("P", 4)):
            assert got[key] == pytest.approx(float(last[col]), rel=1e-9)

    def test_byte_identical_reruns(self, small, tmp_path):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert main(["design", str(small), "--out", str(out), "--deterministic"]) == 0
        for name in ("history.csv", "waveform.csv", "beampattern.csv", "correlation.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        m0 = json.loads((outs[0] / "manifest.json").read_text())
        m1 = json.loads((outs[1] / "manifest.json").read_text())
        assert m0 == m1

    def test_invalid_scenario_exit_2_no_outputs(self, tmp_path):
        bad = write_scenario(tmp_path / "bad.json", n_samples=3)
        out = tmp_path / "out"
        assert main(["design", str(bad), "--out", str(out)]) == 2
        assert not out.exists()
        assert not list(tmp_path.glob(".out.*"))

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["design", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_algorithm_exit_2(self, tmp_path):
        bad = write_scenario(tmp_path / "bad.json", solver={"algorithm": "um-bfgs"})
        assert main(["design", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_solver_failure_exit_1(self, tmp_path):
        bad = write_scenario(tmp_path / "bad.json", solver={"t_bar": 1e6, "max_backtracks": 1})
        out = tmp_path / "o"
        assert main(["design", str(bad), "--out", str(out)]) == 1
        assert not out.exists()

    @pytest.mark.parametrize("algorithm", ["um-gd", "um-svrg"])
    def test_other_algorithms(self, tmp_path, algorithm):
        scen = write_scenario(tmp_path / "s.json", solver={"algorithm": algorithm, "max_epochs": 3})
        out = tmp_path / "o"
        assert main(["design", str(scen), "--out", str(out), "--deterministic"]) == 0
        assert json.loads((out / "manifest.json").read_text())["solver"]["algorithm"] == algorithm


class TestEvaluate:
    def test_all_ones_waveform(self, tmp_path, capsys):
        path = tmp_path / "w.csv"
        write_waveform(path, ProductPoint(1.0, np.ones((64, 8), dtype=complex)))
        capsys.readouterr()
        assert main(["evaluate", str(SCENARIOS / "normal.json"), "--waveform", str(path)]) == 0
        f = json.loads(capsys.readouterr().out)["f"]
        assert np.isfinite(f) and f > 0

    def test_half_modulus_rejected(self, tmp_path, capsys):
        x = np.ones((64, 8), dtype=complex)
        x[3, 2] = 0.5
        path = tmp_path / "w.csv"
        write_waveform(path, ProductPoint(1.0, x))
        assert main(["evaluate", str(SCENARIOS / "normal.json"), "--waveform", str(path)]) == 2
        assert "unimodular" in capsys.readouterr().err

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "w.csv"
        write_waveform(path, ProductPoint(1.0, np.ones((32, 8), dtype=complex)))
        assert main(["evaluate", str(SCENARIOS / "normal.json"), "--waveform", str(path)]) == 2

    def test_writes_metrics_when_asked(self, tmp_path):
        path = tmp_path / "w.csv"
        write_waveform(path, ProductPoint(1.0, np.exp(1j * np.arange(36.0)).reshape(12, 3)))
        scen = write_scenario(tmp_path / "s.json")
        assert main(["evaluate", str(scen), "--waveform", str(path), "--out", str(tmp_path / "ev")]) == 0
        assert (tmp_path / "ev" / "evaluation.json").exists()

    def test_waveform_file_round_trip(self, tmp_path, rng):
        x = np.exp(1j * rng.uniform(0, 6.3, (5, 2)))
        path = tmp_path / "w.csv"
        write_waveform(path, ProductPoint(0.123456789, x))
        back = read_waveform(path)
        assert back.alpha == 0.123456789
        np.testing.assert_array_equal(back.x, x)


class TestGradcheck:
    def test_twenty_trials_pass(self, capsys):
        assert main(["gradcheck", str(SCENARIOS / "gradcheck.json"), "--trials", "20"]) == 0
        cfg = load_scenario(SCENARIOS / "gradcheck.json")
        worst, _, per_step = gradcheck(cfg, 20)
        assert worst < 1e-5
        assert set(per_step) == set(GRADCHECK_STEPS)

    def test_corrupted_gradient_detected(self, capsys):
        assert main(["gradcheck", str(SCENARIOS / "gradcheck.json"), "--trials", "3", "--corrupt-gradient"]) == 1
        assert "seed" in capsys.readouterr().err

    def test_zero_trials(self):
        assert main(["gradcheck", str(SCENARIOS / "gradcheck.json"), "--trials", "0"]) == 0

    def test_negative_trials(self):
        assert main(["gradcheck", str(SCENARIOS / "gradcheck.json"), "--trials", "-1"]) == 2


class TestBench:
    def test_budget_zero_header_only(self, small, tmp_path):
        out = tmp_path / "b"
        assert main(["bench", str(small), "--algorithms", "um-gd", "--budget", "0", "--out", str(out)]) == 0
        assert read_rows(out / "bench.csv") == [["algorithm", "grad_number_per_delay", "iter", "f", "e", "P", "grad_norm"]]

    def test_writes_rows(self, small, tmp_path):
        out = tmp_path / "b"
        assert main(["bench", str(small), "--algorithms", "um-gd,um-svrg", "--budget", "5", "--out", str(out)]) == 0
        rows = read_rows(out / "bench.csv")
        assert {r[0] for r in rows[1:]} == {"um-gd", "um-svrg"}
        assert all(float(r[1]) <= 5 for r in rows[1:])

    def test_unknown_algorithm(self, small, tmp_path):
        assert main(["bench", str(small), "--algorithms", "um-gd,foo", "--out", str(tmp_path / "b")]) == 2

    def test_svrg_inner_step_costs_one_unit(self, tmp_path):
        scen = write_scenario(tmp_path / "s.json", solver={"algorithm": "um-svrg", "m_inner": 5})
        cfg = load_scenario(scen)
        rows = bench_rows(cfg, ["um-svrg"], budget=6)
        counts = [r[1] for r in rows]
        # |D| = 4: snapshot adds 4 units, 5 inner steps add 5 units
        assert counts == [1.0, 13 / 4, 22 / 4]

    def test_equal_budget_for_full_gradient_methods(self, small):
        rows = bench_rows(load_scenario(small), ["um-gd", "um-agd"], budget=7)
        for alg in ("um-gd", "um-agd"):
            counts = [r[1] for r in rows if r[0] == alg]
            assert counts == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]

    def test_agd_reaches_unit_correlation_before_gd(self, tmp_path):
        cfg = load_scenario(SCENARIOS / "normal.json")
        rows = bench_rows(cfg, ["um-gd", "um-agd"], budget=400)
        first = {alg: min(r[2] for r in rows if r[0] == alg and r[5] < 1) for alg in ("um-gd", "um-agd")}
        assert first["um-agd"] < first["um-gd"]


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("umwave")
    cmd = [exe] if exe else [sys.executable, "-m", "umwave"]
    proc = subprocess.run(cmd + ["gradcheck", str(SCENARIOS / "gradcheck.json"), "--trials", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "worst relative error" in proc.stdout


def test_module_entry_point_usage_error():
    proc = subprocess.run([sys.executable, "-m", "umwave", "design"], capture_output=True, text=True)
    assert proc.returncode == 2
