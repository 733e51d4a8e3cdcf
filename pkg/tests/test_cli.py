import io
import math
import subprocess
import sys

import pytest

from qcapacity import cli
from qcapacity.analysis import read_records
from qcapacity.bounds import BoundParams, general_estimation_bound, optimize_bound


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


def pairs(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line and "," not in line)


class TestBound:
    def test_estimation_matches_library(self):
        code, text = run("bound", "--N", "1000000", "--ex", "0.05", "--ez", "0.05",
                         "--epsilon", "1e-6")
        assert code == 0
        kv = pairs(text)
        direct = optimize_bound(BoundParams.estimation(10**6, 1.0, 0.05, 0.05, 1e-6, 0.5))
        assert float(kv["rate"]) == pytest.approx(direct.rate, rel=1e-8)
        assert kv["variant"] == "estimation" and kv["covered"] == "1000000"
        assert {"eta_star", "mu_x", "mu_z", "entropy_term", "log_kappa_term",
                "log_inv_eta_term", "constant_term"} <= kv.keys()

    def test_nine_significant_digits(self):
        _, text = run("bound", "--N", "1000000", "--ex", "0.05", "--ez", "0.05", "--epsilon", "1e-6")
        assert pairs(text)["value"] == f"{401078.687040565:.9g}"

    def test_general_variants(self, tmp_path):
        code, text = run("bound", "--variant", "general-est", "--n", "1000000", "--k", "10000",
                         "--ex", "0.02", "--ez", "0.02", "--epsilon", "1e-6",
                         "--csv", str(tmp_path / "b.csv"))
        assert code == 0
        assert float(pairs(text)["value"]) == pytest.approx(572684.152677252, rel=1e-8)
        assert (tmp_path / "b.csv").read_text().startswith("value,rate,eta_star")
        code, text = run("bound", "--variant", "general-ver", "--n", "200000", "--k", "100000",
                         "--data", "100000", "--q", "0.95", "--ex", "0.03", "--ez", "0.01",
                         "--epsilon", "1e-6", "--p-pass-x", "0.9", "--p-pass-z", "0.9")
        assert code == 0
        assert float(pairs(text)["value"]) == pytest.approx(53626.9529960821, rel=1e-8)

    def test_log_domain_p(self):
        code, text = run("bound", "--N", "64", "--ex", "0", "--ez", "0", "--epsilon", "1e-3",
                         "--log2-one-minus-p", "-64")
        assert code == 0 and float(pairs(text)["value"]) <= 0

    @pytest.mark.parametrize("argv", [
        ("bound", "--N", "7", "--ex", "0.05", "--ez", "0.05", "--epsilon", "1e-6"),
        ("bound", "--N", "100", "--ex", "0.05", "--ez", "0.05", "--epsilon", "2"),
        ("bound", "--ex", "0.05", "--ez", "0.05", "--epsilon", "1e-6"),
        ("bound", "--variant", "general-ver", "--n", "5", "--k", "5", "--ex", "0", "--ez", "0",
         "--epsilon", "0.1"),
        ("bound", "--variant", "general-est", "--n", "5", "--k", "5", "--ex", "0", "--ez", "0",
         "--epsilon", "0.1", "--p-pass-x", "0.5"),
    ])
    def test_invalid_values_exit_2(self, argv):
        assert run(*argv)[0] == 2

    def test_argparse_errors_exit_2(self):
        with pytest.raises(SystemExit) as info:
            run("bound", "--N", "10", "--ex", "0", "--ez", "0", "--epsilon", "0.1",
                "--p", "0.5", "--log2-one-minus-p", "-1")
        assert info.value.code == 2


class TestSimulate:
    def test_identity(self):
        code, text = run("simulate", "--channel", "identity", "--N", "100")
        kv = pairs(text)
        assert code == 0 and float(kv["e_x"]) == float(kv["e_z"]) == 0.0
        direct = optimize_bound(BoundParams.estimation(100, 1.0, 0.0, 0.0, 1e-6, 0.5))
        assert float(kv["value"]) == pytest.approx(direct.value, rel=1e-8)

    def test_files_are_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert run("simulate", "--channel", "dephasing:0.1", "--N", "1000000", "--seed", "7",
                       "--out", str(path))[0] == 0
        assert a.read_bytes() == b.read_bytes()
        rates = read_records(a).transcript.error_rates()
        assert rates.e_z == 0.0

    def test_gilbert_elliott_long_run_rate(self):
        _, text = run("simulate", "--channel", "ge:0.01,0.1,0.01,0.3", "--N", "1000000",
                      "--seed", "3")
        kv = pairs(text)
        assert abs(float(kv["e_x"]) - 0.0364) < 0.005 and abs(float(kv["e_z"]) - 0.0364) < 0.005

    def test_general_split(self):
        code, text = run("simulate", "--channel", "depolarizing:0.1", "--n", "3000", "--k", "1000")
        kv = pairs(text)
        assert code == 0 and (kv["n_x"], kv["n_z"]) == ("3000", "1000")
        expected = general_estimation_bound(3000, 1000, 1.0, float(kv["e_x"]), float(kv["e_z"]),
                                            1e-6, p=0.5)
        assert float(kv["value"]) == pytest.approx(expected.value, rel=1e-8)

    @pytest.mark.parametrize("argv", [
        ("simulate", "--channel", "dephasing:1.5", "--N", "100"),
        ("simulate", "--channel", "bogus", "--N", "100"),
        ("simulate", "--N", "100", "--n", "3", "--k", "3"),
        ("simulate", "--n", "3"),
    ])
    def test_invalid_exit_2(self, argv):
        assert run(*argv)[0] == 2

    def test_unwritable_output_exit_3(self, tmp_path):
        assert run("simulate", "--N", "10", "--out", str(tmp_path / "no" / "x.csv"))[0] == 3


class TestVerify:
    def test_identity_accepts(self):
        code, text = run("verify", "--channel", "identity", "--N", "100", "--tol-ex", "0",
                         "--tol-ez", "0")
        kv = pairs(text)
        assert code == 0 and kv["decision"] == "accept"
        assert kv["covered"] == "100"

    def test_fully_depolarizing_aborts(self):
        code, text = run("verify", "--channel", "fully-depolarizing", "--N", "100",
                         "--tol-ex", "0.1", "--tol-ez", "0.1")
        kv = pairs(text)
        assert code == 1 and kv["decision"] == "abort"
        assert "value" not in kv and "gamma" in kv

    def test_invalid_tolerance(self):
        assert run("verify", "--N", "10", "--tol-ex", "2", "--tol-ez", "0")[0] == 2


class TestSweep:
    def test_n_sweep_final_row(self, tmp_path):
        path = tmp_path / "sweep.csv"
        code, _ = run("sweep", "--axis", "N", "--start", "1e3", "--stop", "1e8", "--num", "60",
                      "--ex", "0.05", "--ez", "0.05", "--epsilon", "1e-2", "--out", str(path))
        lines = path.read_text().splitlines()
        assert code == 0 and len(lines) == 61
        rate = float(lines[-1].split(",")[1])
        assert 0.40 < rate < 0.4273

    def test_single_point_to_stdout(self):
        code, text = run("sweep", "--start", "1e6", "--stop", "1e6", "--num", "1",
                         "--ex", "0.05", "--ez", "0.05", "--epsilon", "1e-2")
        assert code == 0 and len(text.splitlines()) == 2

    def test_epsilon_axis(self):
        code, text = run("sweep", "--axis", "epsilon", "--start", "1e-9", "--stop", "1e-1",
                         "--num", "5", "--ex", "0.05", "--ez", "0.05", "--N", "1000000")
        assert code == 0 and text.splitlines()[0] == "epsilon,rate,value,eta_star"

    def test_bad_spec_exit_2(self):
        assert run("sweep", "--start", "10", "--stop", "1", "--ex", "0", "--ez", "0",
                   "--epsilon", "0.1")[0] == 2
        assert run("sweep", "--start", "10", "--stop", "100", "--ex", "0", "--ez", "0")[0] == 2


class TestAnalyze:
    @pytest.fixture
    def transcript_path(self, tmp_path):
        path = tmp_path / "t.csv"
        run("simulate", "--channel", "depolarizing:0.1", "--N", "20000", "--seed", "1",
            "--q", "0.9", "--out", str(path))
        return path

    def test_one_segment_equals_global(self, transcript_path):
        code, text = run("analyze", str(transcript_path), "--segments", "1")
        assert code == 0
        kv = pairs(text)
        assert kv["q"] == "0.9"
        seg_line = text.splitlines()[-1].split(",")
        assert float(seg_line[7]) == pytest.approx(float(kv["asymptotic_rate"]), rel=1e-8)

    def test_all_outputs(self, transcript_path, tmp_path):
        outs = {name: tmp_path / f"{name}.csv" for name in ("seg", "brk", "eps")}
        code, text = run("analyze", str(transcript_path), "--segments", "10",
                         "--segments-out", str(outs["seg"]), "--breaks", "8",
                         "--breaks-out", str(outs["brk"]), "--epsilon-sweep", "1e-9", "1e-1", "5",
                         "--sweep-out", str(outs["eps"]))
        assert code == 0
        assert "segment_variance_ratio" in pairs(text)
        assert len(outs["seg"].read_text().splitlines()) == 11
        brk = outs["brk"].read_text().splitlines()
        assert brk[-1].split(",")[0] == "20000"
        assert float(brk[-1].split(",")[5]) == pytest.approx(float(pairs(text)["rate"]), rel=1e-8)
        assert len(outs["eps"].read_text().splitlines()) == 6

    def test_byte_deterministic(self, transcript_path, tmp_path):
        texts = []
        for i in range(2):
            out = tmp_path / f"b{i}.csv"
            run("analyze", str(transcript_path), "--breaks", "6", "--breaks-out", str(out))
            texts.append(out.read_bytes())
        assert texts[0] == texts[1]

    def test_missing_file_exit_3(self, tmp_path):
        assert run("analyze", str(tmp_path / "missing.csv"))[0] == 3

    def test_malformed_file_exit_3(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("index,basis,prepared,outcome\n0,X,2,0\n")
        assert run("analyze", str(bad))[0] == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qcapacity", "bound", "--N", "1000",
                           "--ex", "0.05", "--ez", "0.05", "--epsilon", "1e-10"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    rate = float(pairs(proc.stdout)["rate"])
    assert rate <= 0 and math.isfinite(rate)
