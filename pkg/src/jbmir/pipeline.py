"""Phantom -> simulate -> reconstruct -> evaluate, with a fixed output layout::

    <out>/config.toml            effective configuration
    <out>/truth/u1.csv, u2.csv   ground truth (plus .pgm previews)
    <out>/data/g1[_clean].csv    sinograms
    <out>/data/g2[_clean].csv    boundary data
    <out>/recon/<mode>/          reconstructed fields and summary.json
    <out>/logs/<mode>.jsonl      per-step run logs
    <out>/profiles/              XCT line profiles
    <out>/report.json            SSIM table written by run-all
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, dumps
from .dot import DotOperator
from .errors import DataError
from .functional import DotModality, JointObjective, JointState, XctModality
from .metrics import SsimParams, line_profile, ssim_report
from .phantom import add_noise, rasterize
from .solver import init_dot, init_xct, jbmir, smir
from .xct import radon_forward

log = logging.getLogger(__name__)

MODES = ("smir-xct", "smir-dot", "jbmir")
WINDOWS = {"xct": (0.0, 2.5), "dot": (0.0, 0.03), "edge": (0.0, 1.0)}


def out_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output.dir)


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_field(base: Path, name: str, f: np.ndarray, window, meta=None):
    io.write_csv(base / f"{name}.csv", f, meta)
    io.write_pgm16(base / f"{name}.pgm", f, window)


def echo_config(cfg: RunConfig) -> Path:
    path = out_dir(cfg) / "config.toml"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(cfg))
    return path


def truth_fields(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    return (rasterize(cfg.phantom, cfg.grid, "xct", cfg.diffusion.mu_floor),
            rasterize(cfg.phantom, cfg.grid, "dot", cfg.diffusion.mu_floor))


def dot_operator(cfg: RunConfig) -> DotOperator:
    return DotOperator(cfg.grid, cfg.optics, cfg.diffusion)


def cmd_phantom(cfg: RunConfig) -> list[Path]:
    base = out_dir(cfg) / "truth"
    u1, u2 = truth_fields(cfg)
    meta = {"phantom": cfg.phantom.name, "h_mm": cfg.grid.h}
    _write_field(base, "u1", u1, WINDOWS["xct"], dict(meta, unit="1/mm", modality="xct"))
    _write_field(base, "u2", u2, WINDOWS["dot"], dict(meta, unit="1/mm", modality="dot"))
    return [base / n for n in ("u1.csv", "u2.csv", "u1.pgm", "u2.pgm")]


def simulate(cfg: RunConfig):
    """Clean and noisy ``(g1, g2)`` for the configured phantom."""
    u1, u2 = truth_fields(cfg)
    g1 = radon_forward(u1, cfg.scan, cfg.grid)
    g2 = dot_operator(cfg).forward(u2)
    n = cfg.noise
    return (g1, add_noise(g1, n.eta1, n.seed, stream=0)), (g2, add_noise(g2, n.eta2, n.seed, stream=1))


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    base = out_dir(cfg) / "data"
    (g1, g1n), (g2, g2n) = simulate(cfg)
    scan_meta = {"angles_deg": np.rad2deg(cfg.scan.angles), "spacing_mm": cfg.scan.spacing,
                 "step_mm": cfg.scan.sampling_step(cfg.grid)}
    opt = cfg.optics
    dot_meta = {"source_angles_deg": np.rad2deg(opt.source_angles),
                "detector_angles_deg": np.rad2deg(opt.detector_angles),
                "sigma_q_mm": opt.sigma_q, "D_mm": cfg.diffusion.D}
    io.write_csv(base / "g1_clean.csv", g1, scan_meta)
    io.write_csv(base / "g1.csv", g1n, dict(scan_meta, eta=cfg.noise.eta1, seed=cfg.noise.seed))
    io.write_csv(base / "g2_clean.csv", g2, dot_meta)
    io.write_csv(base / "g2.csv", g2n, dict(dot_meta, eta=cfg.noise.eta2, seed=cfg.noise.seed))
    return [base / n for n in ("g1_clean.csv", "g1.csv", "g2_clean.csv", "g2.csv")]


def load_data(cfg: RunConfig):
    base = out_dir(cfg) / "data"
    g1 = io.read_csv(base / "g1.csv", cfg.scan.shape)
    g2 = io.read_csv(base / "g2.csv", (cfg.optics.n_sources, cfg.optics.n_detectors))
    return g1, g2


def load_truth(cfg: RunConfig):
    base = out_dir(cfg) / "truth"
    try:
        return (io.read_csv(base / "u1.csv", cfg.grid.shape), io.read_csv(base / "u2.csv", cfg.grid.shape))
    except DataError:
        return None


def dot_init(cfg: RunConfig, dm: DotModality):
    """DOT starting point shared by the single-modality and joint runs."""
    return init_dot(dm, cfg.smir_dot, cfg.schedule, cfg.linesearch)


def _ssim(cfg, rec, truth):
    return ssim_report(rec, truth, cfg.grid, SsimParams(), cfg.output.ssim_domain)


def reconstruct(cfg: RunConfig, mode: str, g1=None, g2=None, truth=None):
    """Run one reconstruction mode. Returns ``(fields, runlog)`` where ``fields``
    maps names (``u``, ``v`` or ``u1`` ... ``v2``) to arrays."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    grid = cfg.grid
    domain = cfg.output.ssim_domain
    if mode == "smir-xct":
        xm = XctModality(grid, cfg.scan, g1)
        u, v, runlog = smir(xm, cfg.smir_xct, cfg.schedule, cfg.linesearch, init=init_xct(grid),
                            truth=None if truth is None else truth[0], ssim_domain=domain)
        return {"u": u, "v": v}, runlog
    dm = DotModality(dot_operator(cfg), g2)
    init2 = dot_init(cfg, dm)
    if mode == "smir-dot":
        u, v, runlog = smir(dm, cfg.smir_dot, cfg.schedule, cfg.linesearch, init=init2,
                            truth=None if truth is None else truth[1], ssim_domain=domain)
        return {"u": u, "v": v}, runlog
    xm = XctModality(grid, cfg.scan, g1)
    u1, v1 = init_xct(grid)
    state, runlog = jbmir(JointObjective(xm, dm, cfg.jbmir), cfg.schedule, cfg.linesearch,
                          init=JointState(u1, v1, *init2), truth=truth, ssim_domain=domain)
    return {"u1": state.u1, "v1": state.v1, "u2": state.u2, "v2": state.v2}, runlog


def _window(name, mode):
    if name.startswith("v"):
        return WINDOWS["edge"]
    if name == "u2" or (name == "u" and mode == "smir-dot"):
        return WINDOWS["dot"]
    return WINDOWS["xct"]


def cmd_reconstruct(cfg: RunConfig, mode: str) -> dict:
    g1, g2 = load_data(cfg)
    truth = load_truth(cfg)
    fields, runlog = reconstruct(cfg, mode, g1, g2, truth)
    base = out_dir(cfg) / "recon" / mode
    for name, f in fields.items():
        _write_field(base, name, f, _window(name, mode))
    runlog.to_jsonl(_logs(cfg, mode))
    main = [r for r in runlog.records if r["outer"] >= 0]
    summary = {
        "mode": mode,
        "final_terms": main[-1]["terms"] if main else None,
        "steps": len(main),
        "stalled": sum(r["status"] == "stalled" for r in main),
    }
    if truth is not None:
        if mode == "jbmir":
            summary["ssim"] = {"xct": _ssim(cfg, fields["u1"], truth[0]), "dot": _ssim(cfg, fields["u2"], truth[1])}
        else:
            key = mode.split("-")[1]
            summary["ssim"] = {key: _ssim(cfg, fields["u"], truth[0 if key == "xct" else 1])}
    _write_json(base / "summary.json", summary)
    return summary


def _logs(cfg, mode) -> Path:
    path = out_dir(cfg) / "logs" / f"{mode}.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_evaluate(cfg: RunConfig, rec_file, truth_file, profile_x=None, profile_out=None) -> dict:
    rec = io.read_csv(rec_file, cfg.grid.shape)
    truth = io.read_csv(truth_file, cfg.grid.shape)
    report = _ssim(cfg, rec, truth)
    report.update(reconstruction=str(rec_file), truth=str(truth_file))
    if profile_x is not None:
        prof = line_profile(rec, cfg.grid, profile_x)
        report["profile_length"] = len(prof)
        if profile_out is not None:
            io.write_csv(profile_out, prof, {"columns": "y_mm value", "x_mm": profile_x})
            report["profile"] = str(profile_out)
    return report


def cmd_run_all(cfg: RunConfig, reuse_data: bool = False) -> dict:
    out = out_dir(cfg)
    echo_config(cfg)
    cmd_phantom(cfg)
    data = out / "data"
    if reuse_data and all((data / n).is_file() for n in ("g1.csv", "g2.csv")):
        log.info("reusing simulated data in %s", data)
    else:
        cmd_simulate(cfg)
    summaries = {mode: cmd_reconstruct(cfg, mode) for mode in MODES}
    truth = out / "truth"
    recon = out / "recon"
    prof = out / "profiles"
    x = cfg.output.profile_x
    u1t = io.read_csv(truth / "u1.csv", cfg.grid.shape)
    io.write_csv(prof / "truth_u1.csv", line_profile(u1t, cfg.grid, x), {"columns": "y_mm value", "x_mm": x})
    evals = {
        "smir-xct": cmd_evaluate(cfg, recon / "smir-xct" / "u.csv", truth / "u1.csv", x, prof / "smir-xct_u1.csv"),
        "smir-dot": cmd_evaluate(cfg, recon / "smir-dot" / "u.csv", truth / "u2.csv"),
        "jbmir-xct": cmd_evaluate(cfg, recon / "jbmir" / "u1.csv", truth / "u1.csv", x, prof / "jbmir_u1.csv"),
        "jbmir-dot": cmd_evaluate(cfg, recon / "jbmir" / "u2.csv", truth / "u2.csv"),
    }
    report = {
        "phantom": cfg.phantom.name,
        "ssim": {k: v["ssim"] for k, v in evals.items()},
        "improvement": {
            "xct": evals["jbmir-xct"]["ssim"] - evals["smir-xct"]["ssim"],
            "dot": evals["jbmir-dot"]["ssim"] - evals["smir-dot"]["ssim"],
        },
        "stalled_steps": {m: s["stalled"] for m, s in summaries.items()},
    }
    _write_json(out / "report.json", report)
    return report
