"""Command-line interface.

Subcommands::

    simulate   cavity release dynamics only (envelope CSV + metrics JSON)
    synth      homodyne frames only (binary frame file)
    estimate   frames file -> tomography report
    sweep      full pipeline: simulate + synth + estimate per storage time
    gate       run the acceptance suite and print a pass/fail table

Exit codes: 0 on success, 1 on stage failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from ._version import __version__
from .cavity import (
    ShutterSchedule,
    simulate_release,
    write_release_csv,
    write_release_metrics_json,
)
from .config import ExperimentConfig, load_config
from .errors import PhotonMemError
from .fock import FockDiagonalState, wigner_section, write_photon_number_csv, write_wigner_section_csv
from .gate import run_gate
from .estimation import write_histogram_csv
from .pipeline import (
    atomic_write_text,
    emit_figure_data,
    estimate_frames,
    run_sweep,
    write_report_json,
)
from .synth import AdcSpec, load_frames, save_frames, synth_condition


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonmem",
        description="Storage-and-release single-photon simulator and homodyne estimation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="config file (INI); defaults are built in")
    common.add_argument("--seed", type=int, default=None, help="override the master seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    p = sub.add_parser("simulate", parents=[common], help="run the cavity release simulation")
    p.add_argument("--release", type=float, default=150.0, help="shutter opening time (ns)")

    p = sub.add_parser("synth", parents=[common], help="generate synthetic homodyne frames")
    p.add_argument("--frames", type=int, default=None, help="number of frames")
    p.add_argument("--purity", type=float, default=0.582, help="single-photon weight of the state")
    p.add_argument("--release", type=float, default=150.0, help="shutter opening time (ns)")
    p.add_argument("--adc-bits", type=int, default=8, help="ADC resolution (0 disables quantization)")
    p.add_argument("--full-scale", type=float, default=AdcSpec().full_scale, help="ADC full scale")

    p = sub.add_parser("estimate", parents=[common], help="estimate a state from a frame file")
    p.add_argument("frames_file", type=Path, help="binary frame file written by 'synth'")

    p = sub.add_parser("sweep", parents=[common], help="run the full storage-time sweep")
    p.add_argument("--frames", type=int, default=None, help="override frames per condition")
    p.add_argument("--workers", type=int, default=None, help="parallel workers over conditions")

    p = sub.add_parser("gate", parents=[common], help="run the acceptance criteria")
    p.add_argument("--criteria", type=int, nargs="*", default=None, help="subset of criterion numbers")

    return parser


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if getattr(args, "frames", None) is not None:
        cfg = replace(cfg, frames_per_condition=args.frames)
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, n_workers=args.workers)
    return cfg


def _schedule(cfg: ExperimentConfig, t_release: float) -> ShutterSchedule:
    return ShutterSchedule(
        t_release_ns=t_release,
        delta_closed_rad_s=cfg.delta_closed_rad_s,
        t_start_ns=cfg.window_start_ns,
        t_end_ns=cfg.window_end_ns,
        dt_int_ns=cfg.dt_int_ns,
    )


def _cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    result = simulate_release(cfg.cavity, _schedule(cfg, args.release))
    args.out.mkdir(parents=True, exist_ok=True)
    write_release_csv(result, args.out / "envelope.csv")
    write_release_metrics_json(result, args.out / "release_metrics.json")
    print(json.dumps(result.metrics, indent=2, sort_keys=True))
    return 0


def _cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    release = simulate_release(cfg.cavity, _schedule(cfg, args.release))
    n_frames = args.frames or cfg.frames_per_condition
    adc = AdcSpec(args.adc_bits, args.full_scale) if args.adc_bits else None
    fs = synth_condition(
        FockDiagonalState.two_level(args.purity),
        release.envelope,
        n_frames,
        cfg.master_seed,
        t0=cfg.window_start_ns,
        n_samples=int(round(cfg.window_end_ns - cfg.window_start_ns)),
        imperfections=cfg.imperfections,
        adc=adc,
        n_workers=cfg.n_workers,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "frames.bin"
    save_frames(fs, path)
    print(f"wrote {fs.n_frames} x {fs.n_samples} frames to {path}")
    return 0


def _cmd_estimate(args) -> int:
    cfg = _load_cfg(args)
    fs = load_frames(args.frames_file)
    report, pca, quads = estimate_frames(
        fs, n_max=cfg.n_max, bootstrap_resamples=cfg.bootstrap_resamples
    )
    args.out.mkdir(parents=True, exist_ok=True)
    payload = {
        "photon_number_distribution": [float(v) for v in report.state.c],
        "loglik": report.loglik,
        "purity": report.purity,
        "purity_err": report.purity_err,
        "wigner_origin": report.wigner_origin,
        "pca_eigenvalue": pca.eigenvalue,
        "n_frames": fs.n_frames,
    }
    atomic_write_text(args.out / "tomography.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_histogram_csv(report.histogram, args.out / "histogram.csv")
    write_wigner_section_csv(wigner_section(report.state), args.out / "wigner_section.csv")
    write_photon_number_csv(report.state, args.out / "photon_number.csv")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    report = run_sweep(cfg)
    emit_figure_data(report, args.out)
    write_report_json(report, args.out / "report.json")
    for c in report.conditions:
        status = c.error or f"purity {c.tomography.purity:.4f} +- {c.tomography.purity_err:.4f}"
        print(f"storage {c.storage_time_ns:6.1f} ns: {status}")
    if report.decay_raw:
        print(f"raw decay fit:     P0 = {report.decay_raw.p0:.4f}, tau = {report.decay_raw.tau_us:.3f} us")
    if report.decay_shifted:
        print(f"shifted decay fit: P0 = {report.decay_shifted.p0:.4f}, tau = {report.decay_shifted.tau_us:.3f} us")
    return 1 if report.failed else 0


def _cmd_gate(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    results = run_gate(indices=args.criteria, out_json=args.out / "gate_results.json")
    return 0 if results and all(r.passed for r in results) else 1


_COMMANDS = {
    "simulate": _cmd_simulate,
    "synth": _cmd_synth,
    "estimate": _cmd_estimate,
    "sweep": _cmd_sweep,
    "gate": _cmd_gate,
}


def cli_entry(argv: list[str] | None = None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (PhotonMemError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(cli_entry())


if __name__ == "__main__":
    main()
