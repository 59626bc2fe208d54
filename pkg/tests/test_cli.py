import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from jiggle_rr import cli
from jiggle_rr.errors import ConvergenceError
from jiggle_rr.flo import symmetry_defect
from jiggle_rr.model import ReducedParams

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "kernel_chi1_betainf.csv")
SMALL_SCAN = ["--chi-grid", "1", "--beta-grid", "10,inf", "--omega-grid", "symlog:0.1:10:5",
              "--no-analyticity"]

# one quick invocation per subcommand, used for determinism checks
RUNS = {
    "kernel": ["kernel", "--chi", "1", "--beta", "10"],
    "spectrum": ["spectrum", "--beta", "10", "--omega-grid", "symlog:0.5:2:3"],
    "flo-scan": ["flo-scan"] + SMALL_SCAN,
    "roots": ["roots"],
    "evolve": ["evolve", "--model", "amended", "--gamma", "0.05", "--beta", "10",
               "--T", "20", "--n-samples", "4096"],
    "markov-probe": ["markov-probe", "--chi-grid", "1,1e-2"],
}


def run(tmp_path, argv, name="out.txt"):
    out = tmp_path / name
    code = cli.main(list(argv) + ["--output", str(out)])
    return code, (out.read_text() if out.exists() else None)


def rows(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def test_parse_grid():
    np.testing.assert_allclose(cli.parse_grid("log:0.01:10:4"), [0.01, 0.1, 1.0, 10.0])
    np.testing.assert_array_equal(cli.parse_grid("1,2,3"), [1.0, 2.0, 3.0])
    assert cli.parse_grid("symlog:1:2:2").tolist() == [-2.0, -1.0, 1.0, 2.0]
    assert np.isinf(cli.parse_grid("0.1,inf", beta=True)[1])
    for bad in ("log:0:1:3", "lin:0:1:0", "", "a,b"):
        with pytest.raises(Exception):
            cli.parse_grid(bad)


def test_kernel_command(tmp_path):
    code, text = run(tmp_path, ["kernel"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "tau,D,err" and len(lines) == 9
    assert text.endswith("\n") and "\r" not in text


def test_kernel_matches_golden(tmp_path):
    code, text = run(tmp_path, ["kernel", "--chi", "1", "--beta", "inf",
                                "--tau-grid", "log:0.01:10:32"])
    assert code == 0
    got = rows(text)
    with open(GOLDEN, newline="") as fh:
        gold = list(csv.DictReader(fh))
    assert len(got) == len(gold) == 32
    for g, r in zip(gold, got):
        assert float(r["tau"]) == float(g["tau"])
        assert abs(float(r["D"]) - float(g["D"])) <= 1e-10 * max(1.0, abs(float(g["D"])))


def test_spectrum_boundary_symmetric(tmp_path):
    code, text = run(tmp_path, ["spectrum", "--stats", "quantum", "--boundary", "--beta", "10",
                                "--omega-grid", "symlog:0.3:3:4"])
    assert code == 0
    r = rows(text)
    w = np.array([float(x["omega"]) for x in r])
    mu = np.array([complex(float(x["re_mu"]), float(x["im_mu"])) for x in r])
    err = np.array([float(x["re_err"]) + float(x["im_err"]) for x in r])
    assert symmetry_defect(w, mu, err, 1e-10).passed


def test_spectrum_classical_violation(tmp_path):
    code, text = run(tmp_path, ["spectrum", "--stats", "classical", "--beta", "10",
                                "--omega-grid=-1,1"])
    assert code == 0
    assert any(float(x["re_mu"]) < 0 for x in rows(text))
    assert all(x["stats"] == "classical" for x in rows(text))


def test_spectrum_complex_point(tmp_path):
    code, text = run(tmp_path, ["spectrum", "--complex", "1,0.5"])
    assert code == 0
    [r] = rows(text)
    mu0 = ReducedParams.create(1.0).mu0
    golden = (1.2818859320558473 - 0.21220540628191448j) * mu0
    assert r["omega"] == "1+0.5j"
    assert abs(float(r["re_mu"]) - golden.real) <= float(r["re_err"])
    assert abs(float(r["im_mu"]) - golden.imag) <= float(r["im_err"])


def test_flo_scan_quantum_and_classical(tmp_path):
    code, text = run(tmp_path, ["flo-scan", "--stats", "quantum"] + SMALL_SCAN, "q.json")
    assert code == 0
    doc = json.loads(text)
    assert len(doc["reports"]) == 2
    assert all(r["passed"] and not r["violations"] for r in doc["reports"])
    code, text = run(tmp_path, ["flo-scan", "--stats", "classical"] + SMALL_SCAN, "c.json")
    assert code == 0
    doc = json.loads(text)
    assert len(doc["reports"]) == 1  # zero temperature is skipped for classical statistics
    assert doc["reports"][0]["violations"]


def test_roots_command(tmp_path):
    code, text = run(tmp_path, ["roots", "--gamma", "0.1", "--omega0", "1"])
    assert code == 0
    roots = json.loads(text)["roots"]
    up = [r for r in roots if r["im"] > 0]
    assert len(up) == 1 and abs(up[0]["re"]) < 1e-10
    assert all(r["residual"] < 1e-10 for r in roots)


def test_evolve_amended(tmp_path):
    code, text = run(tmp_path, RUNS["evolve"])
    assert code == 0
    assert text.startswith("# model=amended\n")
    r = np.array([float(x["r"]) for x in rows(text)])
    a = np.abs(r)
    peaks = a[1:-1][(a[1:-1] >= a[:-2]) & (a[1:-1] > a[2:])]
    assert len(peaks) > 3 and np.all(np.diff(peaks) <= 1e-6)


def test_evolve_classical_runaway(tmp_path):
    code, text = run(tmp_path, ["evolve", "--model", "classical-al", "--no-suppress-runaway",
                                "--gamma", "0.1", "--T", "2", "--dt", "0.1"])
    assert code == 0
    r = np.array([float(x["r"]) for x in rows(text)])
    assert abs(r[-1]) > 1e5 and abs(r[-1]) > abs(r[len(r) // 2]) * 100
    assert "# suppress_runaway=false" in text


def test_evolve_volterra(tmp_path):
    code, text = run(tmp_path, ["evolve", "--model", "volterra", "--gamma", "0.05", "--beta",
                                "10", "--T", "2", "--dt", "0.02"])
    assert code == 0
    assert "# label=DIAGNOSTIC" in text and text.startswith("# model=volterra\n")


def test_runaway_exit_code(tmp_path, capsys):
    code, text = run(tmp_path, ["evolve", "--model", "classical-al", "--no-suppress-runaway",
                                "--gamma", "0.1", "--T", "100", "--dt", "0.1"])
    assert code == 4 and text is None
    assert "timescale 0.0990289" in capsys.readouterr().err


def test_markov_probe_command(tmp_path):
    code, text = run(tmp_path, ["markov-probe"])
    assert code == 0
    r = rows(text)
    assert [float(x["chi"]) for x in r] == [1.0, 1e-2, 1e-3, 1e-4]
    assert float(r[0]["D"]) == pytest.approx(-5.4419948896372269e-4, rel=1e-9)


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# kernel run\nchi = 0.5\nbeta = 10\ntau_grid = 0.5,1\n")
    code, a = run(tmp_path, ["kernel", "--config", str(cfg)], "a.csv")
    code2, b = run(tmp_path, ["kernel", "--chi", "0.5", "--beta", "10", "--tau-grid", "0.5,1"],
                   "b.csv")
    assert code == code2 == 0 and a == b
    code, c = run(tmp_path, ["kernel", "--config", str(cfg), "--chi", "2"], "c.csv")
    d = run(tmp_path, ["kernel", "--chi", "2", "--beta", "10", "--tau-grid", "0.5,1"], "d.csv")[1]
    assert code == 0 and c == d and c != a


def test_config_booleans(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = classical-al\nsuppress-runaway = false\nT = 1\ndt = 0.5\n")
    code, text = run(tmp_path, ["evolve", "--config", str(cfg)])
    assert code == 0 and "# suppress_runaway=false" in text


@pytest.mark.parametrize("content", ["bogus = 1\n", "chi 1\n", "chi = abc\n",
                                     "suppress-runaway = maybe\n", "= 3\n"])
def test_bad_config_exits_2_without_output(tmp_path, content, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(content)
    cmd = "evolve" if "suppress" in content else "kernel"
    code, text = run(tmp_path, [cmd, "--config", str(cfg)])
    assert code == 2 and text is None
    assert "configuration error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["kernel", "--tau-grid", "0.0001,1"],
                                  ["spectrum", "--stats", "classical"],
                                  ["kernel", "--threads", "0"],
                                  ["flo-scan", "--omega-grid", "0,1"],
                                  ["nonsense"]])
def test_invalid_arguments_exit_2(tmp_path, argv):
    code, text = run(tmp_path, argv)
    assert code == 2 and text is None


def test_missing_config_file(tmp_path):
    code, text = run(tmp_path, ["kernel", "--config", str(tmp_path / "nope.cfg")])
    assert code == 2 and text is None


def test_numeric_failure_exit_3(tmp_path, monkeypatch):
    def boom(taus, params, *a, **k):
        from jiggle_rr.kernel import KernelTable
        t = KernelTable(taus, np.zeros(len(taus)), np.zeros(len(taus)), "quantum", params,
                        np.array([True] + [False] * (len(taus) - 1)))
        raise ConvergenceError("memory kernel did not converge", partial=t)

    monkeypatch.setattr(cli, "kernel_table", boom)
    code, text = run(tmp_path, ["kernel", "--tau-grid", "1,2"])
    assert code == 3
    assert text.splitlines()[2].endswith(",nan")


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("JIGGLE_RR_THREADS", "x")
    assert run(tmp_path, ["roots"])[0] == 2
    monkeypatch.setenv("JIGGLE_RR_THREADS", "2")
    assert cli.parse(["roots"]).threads == 2


@pytest.mark.parametrize("name", sorted(RUNS))
def test_byte_identical_reruns(tmp_path, name):
    a = run(tmp_path, RUNS[name], "a.out")
    b = run(tmp_path, RUNS[name], "b.out")
    c = run(tmp_path, RUNS[name] + ["--threads", "3"], "c.out")
    assert a[0] == b[0] == c[0] == 0
    assert a[1] == b[1] == c[1]


def test_console_script_stdout():
    proc = subprocess.run([sys.executable, "-m", "jiggle_rr.cli", "roots"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["gamma"] == 0.1
