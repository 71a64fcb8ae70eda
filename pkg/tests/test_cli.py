import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from graphtf import chain, grid2d, theory
from graphtf.cli import RunConfig, UsageError, main
from graphtf.io import read_signal, write_edge_list, write_labels, write_signal
from graphtf.theory import TheoryReport


@pytest.fixture
def data(tmp_path):
    g = grid2d(5, 6)
    rng = np.random.default_rng(0)
    truth = np.where(np.arange(g.n) % 6 < 3, 0.0, 2.0)
    y = truth + 0.5 * rng.standard_normal(g.n)
    paths = {k: str(tmp_path / f) for k, f in [("graph", "g.txt"), ("signal", "y.csv"), ("truth", "x.csv")]}
    write_edge_list(g, paths["graph"])
    write_signal(paths["signal"], y)
    write_signal(paths["truth"], truth)
    paths["dir"] = tmp_path
    return paths


def _run(*argv):
    return main([str(a) for a in argv])


def _bytes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            p = os.path.join(dirpath, f)
            out[os.path.relpath(p, root)] = open(p, "rb").read()
    return out


def test_denoise_zero_lambda_is_identity(data):
    out = str(data["dir"] / "fit.csv")
    assert _run("denoise", "--graph", data["graph"], "--signal", data["signal"], "--lambda", 0, "--output", out) == 0
    assert open(out).read() == open(data["signal"]).read()
    meta = json.load(open(data["dir"] / "fit.json"))
    assert meta["converged"] and meta["lambda"] == 0.0
    assert set(meta) >= {"lambda", "k", "method", "df", "objective", "iterations", "converged"}
    assert "wall_time" not in meta


def test_denoise_k2_routing(data):
    out = str(data["dir"] / "fit.csv")
    assert _run("denoise", "--graph", data["graph"], "--signal", data["signal"], "--k", 2,
                "--method", "auto", "--lambda", 0.3, "--output", out) == 0
    assert json.load(open(data["dir"] / "fit.json"))["method"] == "admm+maxflow"


def test_denoise_timing_flag(data):
    out = str(data["dir"] / "fit.csv")
    _run("denoise", "--graph", data["graph"], "--signal", data["signal"], "--lambda", 0.3,
         "--output", out, "--timing")
    assert json.load(open(data["dir"] / "fit.json"))["wall_time"] >= 0


def test_denoise_sparse(data):
    out = str(data["dir"] / "fit.csv")
    assert _run("denoise", "--graph", data["graph"], "--signal", data["signal"], "--lambda", 0.3,
                "--lambda2", 0.5, "--output", out) == 0
    assert json.load(open(data["dir"] / "fit.json"))["method"].startswith("sparse-")


def test_unconverged_exit_code(data):
    out = str(data["dir"] / "fit.csv")
    code = _run("denoise", "--graph", data["graph"], "--signal", data["signal"], "--k", 3,
                "--lambda", 0.5, "--max-iters", 1, "--output", out)
    assert code == 2
    assert json.load(open(data["dir"] / "fit.json"))["converged"] is False


def test_malformed_edge_line(data, capsys):
    bad = data["dir"] / "bad.txt"
    bad.write_text("3 2\n0 1\n1 q\n")
    code = _run("denoise", "--graph", bad, "--signal", data["signal"], "--lambda", 1, "--output", data["dir"] / "o.csv")
    assert code == 1
    assert "bad.txt:3:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["denoise", "--lambda", "1"],
        ["denoise", "--lambda", "-1", "--graph", "g", "--signal", "s", "--output", "o"],
        ["denoise", "--graph", "missing.txt", "--signal", "s.csv", "--lambda", "1", "--output", "o.csv"],
        ["path", "--lambda-grid", "1:0.1:5"],
        ["simulate", "--generator", "mixture", "--sigma", "0,1", "--output", "d"],
        ["theory", "--check", "nope"],
    ],
)
def test_input_errors_exit_one(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_argparse_errors_exit_one():
    with pytest.raises(SystemExit) as exc:
        main(["denoise", "--k", "two"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_dimension_mismatch(data, capsys):
    short = data["dir"] / "short.csv"
    write_signal(str(short), np.zeros(4))
    assert _run("denoise", "--graph", data["graph"], "--signal", short, "--lambda", 1, "--output", data["dir"] / "o.csv") == 1
    assert "nodes" in capsys.readouterr().err


def test_config_file(data):
    cfg = data["dir"] / "cfg.json"
    cfg.write_text(json.dumps({"graph": data["graph"], "signal": data["signal"], "lam": 0.0}))
    out = str(data["dir"] / "fit.csv")
    assert _run("denoise", "--config", cfg, "--output", out) == 0
    assert open(out).read() == open(data["signal"]).read()
    cfg.write_text(json.dumps({"graph": data["graph"], "colour": "red"}))
    assert _run("denoise", "--config", cfg, "--output", out) == 1


def test_run_config_rejects_unknown():
    with pytest.raises(UsageError):
        RunConfig.from_mapping("denoise", {"bogus": 1})
    with pytest.raises(UsageError):
        RunConfig.from_mapping("denoise", {"tol": 0.0})
    assert RunConfig.from_mapping("denoise", {"k": 2}).k == 2


def test_path_auto_grid(data):
    out = str(data["dir"] / "path.csv")
    assert _run("path", "--graph", data["graph"], "--signal", data["signal"], "--truth", data["truth"],
                "--output", out) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 50
    assert list(rows[0]) == ["lambda", "df", "objective", "mse", "snr"]
    assert rows[0]["df"] == "1" and rows[0]["mse"] != ""
    meta = json.load(open(data["dir"] / "path.json"))
    assert meta["count"] == 50 and meta["truth"] is True


def test_path_explicit_grid_with_fits(data):
    out = str(data["dir"] / "path.csv")
    fits = data["dir"] / "fits"
    assert _run("path", "--graph", data["graph"], "--signal", data["signal"], "--lambda-grid", "0.01:1:4",
                "--fits-dir", fits, "--output", out) == 0
    rows = list(csv.DictReader(open(out)))
    assert [float(r["lambda"]) for r in rows] == pytest.approx(np.geomspace(1, 0.01, 4))
    assert rows[0]["mse"] == ""
    assert sorted(os.listdir(fits)) == [f"fit_{i:03d}.csv" for i in range(4)]
    assert read_signal(str(fits / "fit_000.csv")).shape == (30,)


def test_simulate_outputs(tmp_path):
    out = tmp_path / "sim"
    assert _run("simulate", "--generator", "poisson-sparse", "--nnz", 30, "--rows", 8, "--cols", 8,
                "--sigma", "0.5,1", "--seed", 4, "--output", out) == 0
    assert sorted(os.listdir(out)) == ["graph.txt", "metadata.json", "noisy_0.csv", "noisy_1.csv",
                                       "sweep.csv", "truth.csv"]
    meta = json.load(open(out / "metadata.json"))
    assert meta["generator"]["nnz"] == 30
    assert meta["n"] == 64 and meta["sigma"] == [0.5, 1.0]
    rows = list(csv.DictReader(open(out / "sweep.csv")))
    assert set(rows[0]) >= {"noise_snr", "method", "best_mse"}
    assert {r["method"] for r in rows} == {"gtf-k0", "laplacian-k0"}
    assert len(rows) == 4


def test_transduce_seed_draw_and_baseline(tmp_path):
    g = grid2d(6, 6)
    gpath, lpath = str(tmp_path / "g.txt"), str(tmp_path / "truth.csv")
    write_edge_list(g, gpath)
    write_labels(lpath, (np.arange(36) % 6 >= 3).astype(int))
    outs = {}
    for base in ("gtf", "laplacian"):
        o = str(tmp_path / f"{base}.csv")
        assert _run("transduce", "--graph", gpath, "--labels", lpath, "--per-class", 3, "--seed", 2,
                    "--baseline", base, "--lambda", 0.2, "--output", o) == 0
        outs[base] = json.load(open(tmp_path / f"{base}.json"))
    assert outs["gtf"]["method"] == "mad-gtf"
    assert outs["laplacian"]["method"] == "mad-laplacian"
    assert outs["gtf"]["epsilon"] == 0.01 and outs["gtf"]["observed"] == 6
    assert 0 <= outs["gtf"]["misclassification"] <= 1


def test_transduce_features_and_seed_file(tmp_path):
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(0, 0.3, (10, 2)), rng.normal(3, 0.3, (10, 2))])
    fpath = tmp_path / "f.csv"
    np.savetxt(fpath, X, delimiter=",")
    spath = str(tmp_path / "s.csv")
    write_labels(spath, [0, 1], nodes=[0, 19])
    out = str(tmp_path / "lab.csv")
    assert _run("transduce", "--features", fpath, "--seeds-file", spath, "--output", out) == 0
    labels = [int(r["class"]) for r in csv.DictReader(open(out))]
    assert labels == [0] * 10 + [1] * 10


def test_theory_single_check(tmp_path):
    out = tmp_path / "t.jsonl"
    assert _run("theory", "--check", "covering", "--n", 100, "--output", out) == 0
    recs = [json.loads(line) for line in open(out)]
    assert len(recs) == 1 and recs[0]["check"] == "covering" and recs[0]["pass"]
    assert set(recs[0]) == {"check", "params", "computed", "bound", "pass"}


def test_theory_failure_exit_three(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(theory.CHECKS, "always-fails", lambda n=None: [TheoryReport.upper("always-fails", {}, 2.0, 1.0)])
    assert _run("theory", "--check", "atoms,always-fails") == 3
    captured = capsys.readouterr()
    assert len(captured.out.splitlines()) == 2
    assert "FAILED" in captured.err and "always-fails" in captured.err


def _all_commands(data, root):
    g5 = str(root / "chain.txt")
    write_edge_list(chain(12), g5)
    lab = str(root / "lab.csv")
    write_labels(lab, (np.arange(30) >= 15).astype(int))
    return [
        ["denoise", "--graph", data["graph"], "--signal", data["signal"], "--k", 1, "--lambda", 0.4, "--output", root / "d.csv"],
        ["path", "--graph", data["graph"], "--signal", data["signal"], "--truth", data["truth"], "--k", 2,
         "--lambda-grid", "0.05:2:5", "--fits-dir", root / "fits", "--output", root / "p.csv"],
        ["simulate", "--generator", "random-walk", "--rows", 6, "--cols", 6, "--sigma", "1", "--seed", 9,
         "--output", root / "sim"],
        ["transduce", "--graph", data["graph"], "--labels", lab, "--per-class", 2, "--seed", 5, "--output", root / "t.csv"],
        ["theory", "--check", "atoms", "--output", root / "th.jsonl"],
    ]


def test_every_command_is_byte_deterministic(data, tmp_path):
    snaps = []
    for run in ("a", "b"):
        root = tmp_path / run
        root.mkdir()
        for argv in _all_commands(data, root):
            assert _run(*argv) == 0
        snaps.append(_bytes(root))
    assert snaps[0].keys() == snaps[1].keys()
    for name in snaps[0]:
        assert snaps[0][name] == snaps[1][name], name


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "graphtf", "theory", "--check", "atoms"],
                       capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 0
    assert json.loads(r.stdout)["check"] == "atom-distance"
