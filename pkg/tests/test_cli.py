import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from lpeuler import cli
from lpeuler.cli import ConfigError, main, read_config, SIMULATE_KEYS
from lpeuler.fieldio import write_field
from lpeuler.lp import FrequencyGrid, SpectralField


def body(path):
    """CSV text without the timestamp line."""
    return path.read_text().split("\n", 1)[1]


def table(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def write_cfg(path, **kv):
    path.write_text("".join(f"{k} = {v}\n" for k, v in kv.items()))
    return path


class TestConfig:
    def test_parse(self, tmp_path):
        cfg = write_cfg(tmp_path / "a.cfg", grid_n=32, dealias="yes", lp_exponents="2, 4, inf")
        out = read_config(cfg, SIMULATE_KEYS)
        assert out == {"grid_n": 32, "dealias": True, "lp_exponents": (2.0, 4.0, math.inf)}

    def test_comments_and_blanks(self, tmp_path):
        p = tmp_path / "a.cfg"
        p.write_text("# header\n\ndt = 0.01  # step\n")
        assert read_config(p, SIMULATE_KEYS) == {"dt": 0.01}

    @pytest.mark.parametrize("text", ["bogus = 1\n", "dt 0.1\n", "dt = 1\ndt = 2\n", "grid_n = x\n", "dealias = maybe\n"])
    def test_rejected(self, tmp_path, text):
        p = tmp_path / "a.cfg"
        p.write_text(text)
        with pytest.raises(ConfigError):
            read_config(p, SIMULATE_KEYS)


class TestNorms:
    def test_zero_field(self, tmp_path, capsys):
        path = tmp_path / "z.lpf"
        write_field(path, SpectralField.zeros(FrequencyGrid(32)))
        code = main(["norms", "--input", str(path), "--space", "B:s=2,p=2,q=2", "--weight", "log:alpha=1"])
        assert code == 0
        assert capsys.readouterr().out.strip() == "0"

    def test_embedding_violation_exits_one(self, tmp_path, monkeypatch):
        path = tmp_path / "z.lpf"
        write_field(path, SpectralField.zeros(FrequencyGrid(32)))
        monkeypatch.setattr(cli, "verify_embedding", lambda f, s, p: (2.0, 1.0, 2.0))
        assert main(["norms", "--input", str(path), "--embedding"]) == 1

    @pytest.mark.parametrize("extra", [["--space", "B:s=2"], ["--weight", "log:alpha=-1"], ["--space", "F:s=1,p=inf,q=2"]])
    def test_bad_config(self, tmp_path, extra):
        path = tmp_path / "z.lpf"
        write_field(path, SpectralField.zeros(FrequencyGrid(32)))
        assert main(["norms", "--input", str(path)] + extra) == 2

    def test_missing_file(self, tmp_path):
        assert main(["norms", "--input", str(tmp_path / "nope.lpf")]) == 2


class TestVerify:
    def test_paraproduct(self, tmp_path):
        out = tmp_path / "pp.csv"
        assert main(["verify", "--suite", "paraproduct", "--samples", "10", "--grid", "64", "--seed", "1",
                     "--out", str(out)]) == 0
        rows = table(out)
        samples = [r for r in rows if r["sample_id"] != "max_ratio"]
        assert len(samples) == 10
        summary = [r for r in rows if r["sample_id"] == "max_ratio"]
        assert float(summary[0]["ratio"]) <= 1e-10
        assert out.with_suffix(".png").exists()
        text = out.read_text()
        assert "# suite = paraproduct" in text and "# estimate = paraproduct" in text

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert main(["verify", "--suite", "leibniz", "--samples", "3", "--seed", "5", "--out", str(p),
                         "--no-figure"]) == 0
        assert body(a) == body(b)
        assert not a.with_suffix(".png").exists()

    def test_thread_count_does_not_change_output(self, tmp_path, monkeypatch):
        outs = []
        for threads in ("1", "4"):
            monkeypatch.setenv("LPEULER_THREADS", threads)
            p = tmp_path / f"t{threads}.csv"
            assert main(["verify", "--suite", "multiplier", "--samples", "4", "--out", str(p), "--no-figure"]) == 0
            outs.append(body(p))
        assert outs[0] == outs[1]

    def test_unknown_suite(self):
        assert main(["verify", "--suite", "nope"]) == 2

    def test_violation_exits_one(self, tmp_path, monkeypatch):
        from lpeuler.calculus import EstimateReport
        monkeypatch.setattr(cli.calculus, "run_suite",
                            lambda name, cfg, sweep=None: [EstimateReport("x", [2.0], [1.0], bound=1.0)])
        assert main(["verify", "--suite", "embedding", "--no-figure"]) == 1

    def test_stdout(self, capsys):
        assert main(["verify", "--suite", "bernstein", "--samples", "2"]) == 0
        out = capsys.readouterr().out
        assert "sample_id,lhs,rhs,ratio" in out


class TestSimulate:
    def test_taylor(self, tmp_path):
        out = tmp_path / "taylor.csv"
        cfg = write_cfg(tmp_path / "taylor.cfg", grid_n=64, dt=0.01, t_end=0.5, init="taylor", sample_every=10,
                        out=out)
        assert main(["simulate", "--config", str(cfg)]) == 0
        rows = table(out)
        assert list(rows[0]) == ["t", "energy", "enstrophy", "linf_vorticity", "lp2_vorticity", "grad_u_linf",
                                 "bkm_integrand", "bkm_integral", "space_norm", "apriori_bound", "bkm_bound"]
        norms = np.array([float(r["space_norm"]) for r in rows])
        assert np.ptp(norms) < 1e-6
        text = out.read_text()
        for key in ("grid_n", "dt", "t_end", "init", "space", "weight", "seed", "cfl"):
            assert f"# {key} = " in text
        assert out.with_suffix(".png").exists()

    def test_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path / "r.cfg", grid_n=32, dt=0.01, t_end=0.1, init="random:slope=3", seed=4)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        codes = [main(["simulate", "--config", str(cfg), "--out", str(p), "--no-figure"]) for p in (a, b)]
        assert codes[0] == codes[1] and codes[0] in (0, 1)
        assert body(a) == body(b)
        assert "# init = random:slope=3,seed=4" in a.read_text()

    def test_unknown_key(self, tmp_path):
        cfg = write_cfg(tmp_path / "bad.cfg", grid_n=32, colour="red")
        assert main(["simulate", "--config", str(cfg)]) == 2

    def test_cfl_violation_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path / "bad.cfg", grid_n=64, dt=10.0, t_end=20.0)
        assert main(["simulate", "--config", str(cfg), "--no-figure", "--out", str(tmp_path / "x.csv")]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.cfg")]) == 2


class TestIterate:
    def test_taylor(self, tmp_path):
        out = tmp_path / "it.csv"
        cfg = write_cfg(tmp_path / "it.cfg", grid_n=64, dt=0.01, init="taylor", n_max=3, c_empirical=0.5)
        assert main(["iterate", "--config", str(cfg), "--out", str(out)]) == 0
        rows = table(out)
        assert [r["n"] for r in rows] == ["1", "2", "3"]
        assert all(r["uniform_ok"] == "true" for r in rows)
        assert "# rho = " in out.read_text()

    def test_large_constant(self, tmp_path):
        cfg = write_cfg(tmp_path / "it.cfg", grid_n=32, c_empirical=2.0)
        assert main(["iterate", "--config", str(cfg)]) == 2


class TestWeights:
    def test_table(self, tmp_path):
        out = tmp_path / "w.csv"
        assert main(["weights", "--weight", "log:alpha=1", "--j-max", "4", "--out", str(out)]) == 0
        rows = table(out)
        assert [int(r["j"]) for r in rows] == [-1, 0, 1, 2, 3, 4]
        assert "# admissible = true" in out.read_text()

    def test_check(self):
        assert main(["weights", "--weight", "log:alpha=0.4", "--check"]) == 1
        assert main(["weights", "--weight", "log:alpha=0.4"]) == 0


def test_console_script_and_module(tmp_path):
    r = subprocess.run([sys.executable, "-m", "lpeuler", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
    assert main([]) == 2
