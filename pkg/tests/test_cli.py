import json

import numpy as np
import pytest

from vpmerge.cli import execute


def run(args):
    return execute(args)


@pytest.fixture()
def small_fixture(tmp_path):
    """Two-class dataset file small enough for CLI round trips."""
    out = tmp_path / "two.fvec1"
    code = run([
        "simulate", "--classes", "2", "--dim", "6", "--spectra", "8,1/3,1",
        "--n-per-class", "4000", "--seed", "7", "--out", str(out),
    ])
    assert code == 0
    return out


class TestMixing:
    def test_reference_value(self, tmp_path):
        out = tmp_path / "mix.json"
        code = run(["mixing", "--dim", "3072", "--beta0", "1e-4",
                    "--betaT", "0.02", "--T", "1000", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert abs(doc["t_mix_fraction"] - 0.602) < 0.005
        assert doc["config"]["dim"] == 3072
        assert doc["version"]

    def test_runs_fast(self, tmp_path):
        import time

        t0 = time.time()
        run(["mixing", "--dim", "784", "--out", str(tmp_path / "m.json")])
        assert time.time() - t0 < 1.0


class TestSimulate:
    def test_deterministic_files(self, tmp_path):
        a, b = tmp_path / "a.fvec1", tmp_path / "b.fvec1"
        args = ["simulate", "--classes", "2", "--dim", "4", "--spectra",
                "5,1/2,1", "--n-per-class", "500", "--seed", "3"]
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestAnalyze:
    def test_cascade_and_series(self, tmp_path, small_fixture):
        out = tmp_path / "an.json"
        series = tmp_path / "series.csv"
        code = run([
            "analyze", "--input", str(small_fixture), "--T", "1000",
            "--steps", "101", "--order", "2", "--metric", "top-eigen",
            "--epsilon", "0.06", "--seed", "1",
            "--out", str(out), "--series-out", str(series),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["cascade"]["step"] == doc["merge_times"][0][1]
        header, first = series.read_text().splitlines()[:2]
        assert header == "pair_a,pair_b,step,value"
        assert first.startswith("0,1,0,")

    def test_epsilon_auto(self, tmp_path, small_fixture):
        out = tmp_path / "an.json"
        assert run(["analyze", "--input", str(small_fixture),
                    "--epsilon", "auto", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["merge_times"][0][1] > 0


class TestWindows:
    def test_schema(self, tmp_path, small_fixture):
        out = tmp_path / "win.json"
        code = run([
            "windows", "--input", str(small_fixture), "--steps", "26",
            "--epsilon", "0.06", "--projections", "16", "--seed", "2",
            "--eta-scale", "0.001", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert set(doc) >= {"istar", "classes", "eta_schedule", "config"}
        for cls in doc["classes"]:
            assert set(cls) >= {"class", "t_end", "t_start", "never_merged"}
            assert cls["t_end"] <= cls["t_start"]
        assert len(doc["eta_schedule"]["eta"]) == 1000
        assert doc["eta_schedule"]["warning"] is None


class TestConverge:
    def test_normality_json(self, tmp_path):
        ds = tmp_path / "g.csv"
        rng = np.random.default_rng(0)
        rows = rng.standard_normal((2000, 4))
        ds.write_text("\n".join(
            "0," + ",".join(repr(float(v)) for v in row) for row in rows
        ) + "\n")
        out = tmp_path / "conv.json"
        code = run(["converge", "--input", str(ds), "--steps", "3",
                    "--projections", "8", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["detected_step"] == 0
        assert doc["alpha"] == 0.05
        assert {"t", "reject_frac"} <= set(doc["steps"][0])


class TestProbeCommand:
    def test_csv_output(self, tmp_path, small_fixture):
        out = tmp_path / "probe.csv"
        code = run([
            "probe", "--input", str(small_fixture), "--steps", "5",
            "--merge-step", "600", "--seed", "4", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "step,accuracy,defined"
        assert len(lines) == 6
        last = lines[-1].split(",")
        assert last[0] == "1000" and last[2] == "0"


class TestCf:
    def test_json(self, tmp_path, small_fixture):
        out = tmp_path / "cf.json"
        code = run(["cf", "--input-a", str(small_fixture),
                    "--input-b", str(small_fixture), "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text())["delta"] < 1e-12


class TestTvcheck:
    def test_report(self, tmp_path):
        x = np.linspace(-8, 8, 4001)
        p = np.exp(-0.5 * x**2)
        p /= np.trapezoid(p, x)
        q = np.exp(-0.5 * (x - 0.2) ** 2)
        q /= np.trapezoid(q, x)
        f = tmp_path / "dens.csv"
        f.write_text("# x,p,q\n" + "\n".join(
            f"{float(a)!r},{float(b)!r},{float(c)!r}" for a, b, c in zip(x, p, q)
        ) + "\n")
        out = tmp_path / "tv.json"
        assert run(["tvcheck", "--input", str(f), "--order", "2",
                    "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["holds"] is True
        assert doc["constant"] == 156.0


class TestErrorMapping:
    def test_unknown_flag_usage(self):
        assert run(["mixing", "--dim", "64", "--bogus", "1"]) == 2

    def test_unknown_subcommand(self):
        assert run(["frobnicate"]) == 2

    def test_missing_file_data_error(self, tmp_path, capsys):
        code = run(["analyze", "--input", str(tmp_path / "nope.fvec1")])
        assert code == 3
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "data"

    def test_domain_error_usage(self, tmp_path, small_fixture):
        assert run(["mixing", "--dim", "2"]) == 2


class TestReproducibility:
    def test_rerun_byte_identical(self, tmp_path, small_fixture):
        out = tmp_path / "w.json"
        args = ["windows", "--input", str(small_fixture), "--steps", "11",
                "--epsilon", "0.06", "--projections", "8", "--seed", "5",
                "--out", str(out)]
        assert run(args) == 0
        first = out.read_bytes()
        assert run(args) == 0
        assert out.read_bytes() == first
