"""Full reproduction pipeline: per-condition simulation + synthesis +
estimation, sweep-level decay fits, and figure-data emission.

Every output byte is a pure function of (config, master seed): conditions use
independent derived seeds, may run on any number of workers, and all files
are written atomically (temp + rename) from deterministically formatted text.
"""

from __future__ import annotations

import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeds
from ._version import __version__
from .cavity import (
    ReleaseResult,
    ShutterSchedule,
    simulate_release,
    storage_lifetime,
    write_release_csv,
)
from .config import ExperimentConfig
from .errors import PhotonMemError
from .estimation import (
    DecayFit,
    PcaResult,
    TomographyReport,
    bootstrap_purity,
    build_tomography_report,
    fit_exponential_decay,
    matched_window_pca,
    mle_photon_distribution,
    write_histogram_csv,
)
from .fock import (
    FockDiagonalState,
    wigner_section,
    write_photon_number_csv,
    write_wigner_section_csv,
)
from .modes import ModeFunction, clip_and_renormalize, time_shift
from .synth import FrameSet, extract_quadratures, synth_condition

#: half-width (ns) of the clip window around the base release used by the
#: time-shifted reanalysis branch
SHIFT_CLIP_HALF_WIDTH_NS = 300.0


@dataclass(frozen=True)
class ConditionRecord:
    storage_time_ns: float
    t_release_ns: float
    configured_purity: float
    release: ReleaseResult | None = None
    pca: PcaResult | None = None
    quadratures: np.ndarray | None = None
    tomography: TomographyReport | None = None
    shifted_purity: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class SweepReport:
    conditions: list[ConditionRecord]
    decay_raw: DecayFit | None
    decay_shifted: DecayFit | None
    provenance: dict

    @property
    def failed(self) -> bool:
        return any(c.error is not None for c in self.conditions)


def estimate_frames(
    fs: FrameSet,
    *,
    n_max: int,
    bootstrap_resamples: int,
    master_seed: int | None = None,
) -> tuple[TomographyReport, PcaResult, np.ndarray]:
    """PCA mode + quadrature extraction + MLE + bootstrap for one frame set.

    This is the single estimation path used both in-process by
    :func:`run_sweep` and by the file-mediated CLI, so staged runs reproduce
    in-process results exactly.
    """
    pca = matched_window_pca(fs)
    quads = extract_quadratures(fs, pca.mode)
    err = bootstrap_purity(
        fs, pca.mode, bootstrap_resamples, n_max=n_max, master_seed=master_seed
    )
    report, _ = build_tomography_report(quads, n_max=n_max, purity_err=err)
    return report, pca, quads


def _target_purities(cfg: ExperimentConfig, schedule0: ShutterSchedule) -> tuple[list[float], dict]:
    if cfg.purity_model == "explicit":
        return list(cfg.purities), {}
    lifetime = storage_lifetime(cfg.cavity, schedule0)
    p = [
        min(1.0, cfg.release_purity_p0 * float(np.exp(-t / lifetime.tau_ns)))
        for t in cfg.release_times_ns
    ]
    return p, {"simulated_lifetime_ns": lifetime.tau_ns}


def run_sweep(cfg: ExperimentConfig) -> SweepReport:
    """Run the full per-condition pipeline and both decay fits."""
    n_samples = int(round(cfg.window_end_ns - cfg.window_start_ns))
    schedules = [
        ShutterSchedule(
            t_release_ns=t,
            delta_closed_rad_s=cfg.delta_closed_rad_s,
            t_start_ns=cfg.window_start_ns,
            t_end_ns=cfg.window_end_ns,
            dt_int_ns=cfg.dt_int_ns,
        )
        for t in cfg.release_times_ns
    ]
    purities, extra_prov = _target_purities(cfg, schedules[0])

    def process(k: int, base_mode: ModeFunction | None) -> ConditionRecord:
        storage = cfg.storage_times_ns[k]
        t_release = cfg.release_times_ns[k]
        try:
            release = simulate_release(cfg.cavity, schedules[k])
            state = FockDiagonalState.two_level(purities[k])
            cond_seed = seeds.derive_seed(cfg.master_seed, seeds.DOMAIN_CONDITION, k)
            frames = synth_condition(
                state,
                release.envelope,
                cfg.frames_per_condition,
                cond_seed,
                t0=cfg.window_start_ns,
                n_samples=n_samples,
                imperfections=cfg.imperfections,
                adc=cfg.adc,
            )
            tomo, pca, quads = estimate_frames(
                fs=frames,
                n_max=cfg.n_max,
                bootstrap_resamples=cfg.bootstrap_resamples,
            )
            if base_mode is None:
                base_mode = _clip_base_mode(pca.mode, t_release)
            shifted_mode = time_shift(base_mode, t_release - cfg.release_times_ns[0])
            # late releases in short windows: the shifted mode may poke past
            # the recorded frame, so restrict it to the measured span
            shifted_mode = clip_and_renormalize(
                shifted_mode,
                (cfg.window_start_ns, cfg.window_start_ns + n_samples - 1),
            )
            shifted_quads = extract_quadratures(frames, shifted_mode)
            shifted = float(
                mle_photon_distribution(shifted_quads, cfg.n_max).state.c[1]
            )
            return ConditionRecord(
                storage_time_ns=storage,
                t_release_ns=t_release,
                configured_purity=purities[k],
                release=release,
                pca=pca,
                quadratures=quads,
                tomography=tomo,
                shifted_purity=shifted,
            )
        except (PhotonMemError, ValueError, ArithmeticError) as exc:
            return ConditionRecord(
                storage_time_ns=storage,
                t_release_ns=t_release,
                configured_purity=purities[k],
                error=f"{type(exc).__name__}: {exc}",
            )

    # condition 0 runs first: its estimated mode seeds the shifted reanalysis
    records = [process(0, None)]
    base_mode = None
    if records[0].pca is not None:
        base_mode = _clip_base_mode(records[0].pca.mode, cfg.release_times_ns[0])

    rest = range(1, len(schedules))
    if cfg.n_workers > 1 and len(schedules) > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
            records += list(pool.map(lambda k: process(k, base_mode), rest))
    else:
        records += [process(k, base_mode) for k in rest]

    decay_raw = _fit_or_none(
        [(c.t_release_ns, c.tomography.purity) for c in records if c.tomography]
    )
    decay_shifted = _fit_or_none(
        [(c.t_release_ns, c.shifted_purity) for c in records if c.shifted_purity is not None]
    )
    provenance = {
        "package_version": __version__,
        "config_sha256": cfg.digest(),
        "master_seed": cfg.master_seed,
        "purity_model": cfg.purity_model,
        "config_text": cfg.provenance_text(),
        **extra_prov,
    }
    return SweepReport(
        conditions=records,
        decay_raw=decay_raw,
        decay_shifted=decay_shifted,
        provenance=provenance,
    )


def _clip_base_mode(mode: ModeFunction, t_release: float) -> ModeFunction:
    window = (t_release - SHIFT_CLIP_HALF_WIDTH_NS, t_release + SHIFT_CLIP_HALF_WIDTH_NS)
    return clip_and_renormalize(mode, window)


def _fit_or_none(points) -> DecayFit | None:
    if len(points) < 2:
        return None
    try:
        return fit_exponential_decay(points)
    except (PhotonMemError, ValueError):
        return None


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _decay_dict(fit: DecayFit | None) -> dict | None:
    if fit is None:
        return None
    return {
        "P0": fit.p0,
        "tau_us": fit.tau_us,
        "residuals": [float(r) for r in fit.residuals],
        "warning": fit.warning,
    }


def report_as_dict(report: SweepReport) -> dict:
    conditions = []
    for c in report.conditions:
        entry: dict = {
            "storage_time_ns": c.storage_time_ns,
            "t_release_ns": c.t_release_ns,
            "configured_purity": c.configured_purity,
            "error": c.error,
        }
        if c.tomography is not None:
            entry.update(
                {
                    "photon_number_distribution": [float(v) for v in c.tomography.state.c],
                    "loglik": c.tomography.loglik,
                    "purity": c.tomography.purity,
                    "purity_err": c.tomography.purity_err,
                    "wigner_origin": c.tomography.wigner_origin,
                    "shifted_purity": c.shifted_purity,
                    "pca_eigenvalue": c.pca.eigenvalue,
                    "release_metrics": c.release.metrics,
                }
            )
        conditions.append(entry)
    return {
        "provenance": report.provenance,
        "conditions": conditions,
        "decay_raw": _decay_dict(report.decay_raw),
        "decay_shifted": _decay_dict(report.decay_shifted),
    }


def write_report_json(report: SweepReport, path: str | Path) -> None:
    atomic_write_text(
        Path(path), json.dumps(report_as_dict(report), indent=2, sort_keys=True) + "\n"
    )


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\r\n")
    for row in rows:
        buf.write(",".join(row) + "\r\n")
    return buf.getvalue()


def emit_figure_data(report: SweepReport, out_dir: str | Path) -> list[Path]:
    """Serialize all figure panels as CSV/JSON files; returns written paths.

    Per condition: wavepacket envelope, quadrature samples, histogram +
    fitted overlay, Wigner cross-section, photon-number distribution.  Sweep
    level: |psi(t)|^2 family, decay points and both exponential fits, and the
    top-level report.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(path: Path, text: str) -> None:
        atomic_write_text(path, text)
        written.append(path)

    def emit_via(writer_fn, obj, path: Path) -> None:
        tmp = path.with_name(path.name + ".tmp")
        writer_fn(obj, tmp)
        os.replace(tmp, path)
        written.append(path)

    for c in report.conditions:
        cdir = out / f"condition_{int(round(c.storage_time_ns))}ns"
        cdir.mkdir(parents=True, exist_ok=True)
        if c.release is not None:
            emit_via(write_release_csv, c.release, cdir / "envelope.csv")
            emit(
                cdir / "release_metrics.json",
                json.dumps(c.release.metrics, indent=2, sort_keys=True) + "\n",
            )
        if c.quadratures is not None:
            emit(
                cdir / "quadratures.csv",
                _csv_text(
                    ["index", "x"],
                    ([str(i), f"{x:.12g}"] for i, x in enumerate(c.quadratures)),
                ),
            )
        if c.tomography is not None:
            emit_via(write_histogram_csv, c.tomography.histogram, cdir / "histogram.csv")
            emit_via(write_wigner_section_csv, wigner_section(c.tomography.state), cdir / "wigner_section.csv")
            emit_via(write_photon_number_csv, c.tomography.state, cdir / "photon_number.csv")

    with_release = [c for c in report.conditions if c.release is not None]
    if with_release:
        times = with_release[0].release.envelope.times
        headers = ["t_ns"] + [
            f"psisq_{int(round(c.storage_time_ns))}ns" for c in with_release
        ]
        rows = (
            [f"{times[i]:.12g}"]
            + [f"{c.release.envelope.samples[i] ** 2:.12g}" for c in with_release]
            for i in range(times.size)
        )
        emit(out / "intensity_family.csv", _csv_text(headers, rows))

    decay_rows = [
        [
            f"{c.t_release_ns:.12g}",
            f"{c.tomography.purity:.12g}" if c.tomography else "",
            f"{c.tomography.purity_err:.12g}" if c.tomography else "",
            f"{c.shifted_purity:.12g}" if c.shifted_purity is not None else "",
        ]
        for c in report.conditions
    ]
    emit(
        out / "decay_points.csv",
        _csv_text(["t_release_ns", "purity", "purity_err", "shifted_purity"], decay_rows),
    )
    for name, fit in (("decay_fit_raw.json", report.decay_raw), ("decay_fit_shifted.json", report.decay_shifted)):
        emit(out / name, json.dumps(_decay_dict(fit), indent=2, sort_keys=True) + "\n")
    write_report_json(report, out / "report.json")
    written.append(out / "report.json")
    return written
