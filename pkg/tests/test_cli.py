import json

import numpy as np
import pytest

from jbmir import io
from jbmir.cli import main

# a reduced problem that still exercises every stage
SMALL = ["--set", "grid.nx=40", "--set", "grid.ny=40", "--set", "grid.disk_radius=10.0",
         "--set", "scan.n_rays=40", "--set", "schedule.outer=2", "--set", "schedule.inner=3",
         "--set", "schedule.dot_warm_steps=5", "--set", "schedule.dot_edge_steps=3",
         "--set", "output.profile_x=2.0"]


def run(*args):
    return main(list(args))


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_phantom_command(tmp_path):
    out = tmp_path / "o"
    assert run("phantom", "--out", str(out)) == 0
    u1 = io.read_csv(out / "truth" / "u1.csv", (100, 100))
    u2 = io.read_csv(out / "truth" / "u2.csv", (100, 100))
    assert set(np.unique(u1)) == {0.0, 1.0, 2.0, 2.5}
    assert set(np.unique(u2)) == {1e-6, 0.01, 0.03}
    _, window = io.read_pgm16(out / "truth" / "u2.pgm")
    assert window == (0.0, 0.03)
    first = tree(out)
    assert run("phantom", "--out", str(out)) == 0
    assert tree(out) == first


def test_unknown_phantom_is_config_error(tmp_path, capsys):
    assert run("phantom", "--out", str(tmp_path), "--set", "phantom.name=phantom9") == 2
    assert "phantom9" in capsys.readouterr().err


def test_simulate(tmp_path):
    out = tmp_path / "o"
    assert run("simulate", "--out", str(out), "--seed", "4") == 0
    g1c = io.read_csv(out / "data" / "g1_clean.csv", (30, 100))
    g1 = io.read_csv(out / "data" / "g1.csv", (30, 100))
    g2c = io.read_csv(out / "data" / "g2_clean.csv", (16, 16))
    g2 = io.read_csv(out / "data" / "g2.csv", (16, 16))
    assert abs(np.linalg.norm(g1 - g1c) / np.linalg.norm(g1c) - 0.05) < 1e-12 * 0.05
    assert abs(np.linalg.norm(g2 - g2c) / np.linalg.norm(g2c) - 0.02) < 1e-12 * 0.02
    meta = io.read_meta(out / "data" / "g1.csv")
    assert meta["eta"] == "0.05" and meta["seed"] == "4"
    first = tree(out)
    assert run("simulate", "--out", str(out), "--seed", "4") == 0
    assert tree(out) == first


def test_simulate_without_noise(tmp_path):
    out = tmp_path / "o"
    assert run("simulate", "--out", str(out), "--set", "noise.eta1=0.0", "--set", "noise.eta2=0.0") == 0
    for n in ("g1", "g2"):
        assert (out / "data" / f"{n}.csv").read_bytes().split(b"\n", 1)[1] == \
            (out / "data" / f"{n}_clean.csv").read_bytes().split(b"\n", 1)[1]


def test_reconstruct_missing_data(tmp_path, capsys):
    assert run("reconstruct", "--mode", "smir-xct", "--out", str(tmp_path / "empty")) == 3
    assert "g1.csv" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    assert run("phantom", "--config", str(tmp_path / "absent.toml")) == 2


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    from jbmir import pipeline
    from jbmir.errors import DotSolveError

    def boom(cfg):
        raise DotSolveError("solve failed", source=5)

    monkeypatch.setattr(pipeline, "cmd_phantom", boom)
    assert run("phantom", "--out", str(tmp_path)) == 4


def test_reconstruct_and_evaluate(tmp_path, capsys):
    out = tmp_path / "o"
    common = ["--out", str(out), *SMALL]
    assert run("phantom", *common) == 0
    assert run("simulate", *common) == 0
    assert run("reconstruct", "--mode", "smir-xct", *common) == 0
    summary = json.loads((out / "recon" / "smir-xct" / "summary.json").read_text())
    assert "xct" in summary["ssim"]
    log = [json.loads(line) for line in (out / "logs" / "smir-xct.jsonl").read_text().splitlines()]
    totals = [r["terms"]["total"] for r in log]
    assert np.all(np.diff(totals) <= 0)
    capsys.readouterr()
    truth = out / "truth" / "u1.csv"
    assert run("evaluate", str(truth), str(truth), "--profile-x", "2.0",
               "--profile-out", str(out / "p.csv"), *common) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["ssim"] == 1.0
    assert {"L", "C1", "C2"} <= set(rep)
    assert io.read_csv(out / "p.csv").shape == (40, 2)


def test_uncoupled_joint_matches_single_runs(tmp_path):
    out = tmp_path / "o"
    common = ["--out", str(out), *SMALL, "--set", "params.jbmir.gamma1=0.0", "--set", "params.jbmir.gamma2=0.0",
              # single-modality weights equal to the joint ones
              "--set", "params.smir_xct.beta=0.0019", "--set", "params.smir_dot.beta=6e-05"]
    assert run("run-all", *common) == 0
    rec = out / "recon"
    for joint, single in (("u1", "smir-xct/u"), ("v1", "smir-xct/v"), ("u2", "smir-dot/u"), ("v2", "smir-dot/v")):
        assert (rec / "jbmir" / f"{joint}.csv").read_bytes() == (rec / f"{single}.csv").read_bytes()


def test_run_all_deterministic_and_config_echo(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run("run-all", "--out", str(a), *SMALL) == 0
    assert run("run-all", "--out", str(b), *SMALL) == 0
    ta, tb = tree(a), tree(b)
    ta.pop("config.toml"), tb.pop("config.toml")
    assert ta == tb
    report = json.loads((a / "report.json").read_text())
    assert set(report["ssim"]) == {"smir-xct", "smir-dot", "jbmir-xct", "jbmir-dot"}
    # rerunning from the echoed configuration reproduces everything
    assert run("run-all", "--config", str(a / "config.toml"), "--out", str(c)) == 0
    tc = tree(c)
    tc.pop("config.toml")
    assert tc == ta


def test_reuse_data(tmp_path):
    out = tmp_path / "o"
    assert run("run-all", "--out", str(out), *SMALL) == 0
    g1 = out / "data" / "g1.csv"
    marker = g1.read_bytes()
    # replace the sinogram by itself plus a header tweak; --reuse-data must keep it
    g1.write_bytes(b"# reused\n" + marker.split(b"\n", 1)[1])
    assert run("run-all", "--out", str(out), "--reuse-data", *SMALL) == 0
    assert g1.read_bytes().startswith(b"# reused")
    assert run("run-all", "--out", str(out), *SMALL) == 0
    assert g1.read_bytes() == marker


def test_show_config(capsys):
    assert run("show-config", "--seed", "11") == 0
    assert "seed = 11" in capsys.readouterr().out
