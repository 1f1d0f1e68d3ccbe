"""The verification stack: PCA mode extraction, maximum-likelihood photon-number
tomography, histogram overlays, bootstrap errors, and exponential lifetime fits.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit, minimize

from . import seeds
from .errors import (
    FitFailureError,
    InsufficientDataError,
    UnstableEstimateError,
)
from .fock import DEFAULT_N_MAX, FockDiagonalState, hermite_functions, wigner_origin
from .modes import ModeFunction
from .synth import FrameSet, bin_frames, extract_quadratures

MIN_MLE_SAMPLES = 1000
#: lifetimes longer than this multiple of the data span are capped and flagged
DECAY_TAU_CAP_FACTOR = 100.0


@dataclass(frozen=True)
class PcaResult:
    """Leading auto-covariance eigenpair: estimated mode and its variance."""

    mode: ModeFunction
    eigenvalue: float
    spectrum: np.ndarray

    @property
    def mean_photon(self) -> float:
        """Photon-number estimate implied by the eigenvalue.

        For a phase-insensitive state both quadrature variances equal the
        eigenvalue, so ``2 <n> = <x^2> + <p^2> - 1`` gives ``lambda - 1/2``.
        """
        return self.eigenvalue - 0.5


@dataclass(frozen=True)
class MleResult:
    state: FockDiagonalState
    loglik: float
    n_evals: int
    converged: bool


@dataclass(frozen=True)
class HistogramOverlay:
    """Density-normalized histogram plus the fitted model on bin centers."""

    edges: np.ndarray
    density: np.ndarray
    centers: np.ndarray
    model: np.ndarray


@dataclass(frozen=True)
class TomographyReport:
    """Per-condition estimation results."""

    state: FockDiagonalState
    loglik: float
    purity: float
    purity_err: float
    wigner_origin: float
    histogram: HistogramOverlay

    def __post_init__(self):
        if not 0.0 <= self.purity <= 1.0:
            raise ValueError(f"purity must lie in [0, 1], got {self.purity}")
        if self.purity_err < 0.0:
            raise ValueError("purity_err must be non-negative")


@dataclass(frozen=True)
class DecayFit:
    """P(t) = P0 exp(-t/tau) fit of purity against storage time."""

    p0: float
    tau_us: float
    residuals: np.ndarray
    warning: str | None = None


def autocovariance(fs: FrameSet) -> np.ndarray:
    """Sample second-moment matrix of the frames after mean subtraction.

    Mean subtraction keeps coherent contamination (e.g. scattered LO light)
    out of the mode estimate.  Normalization is 1/M.
    """
    if fs.n_frames < 2:
        raise InsufficientDataError("need at least 2 frames for an auto-covariance")
    x = fs.frames.astype(np.float64)
    x = x - x.mean(axis=0)
    v = (x.T @ x) / fs.n_frames
    return (v + v.T) / 2.0


def pca_leading_mode(v: np.ndarray, *, t0: float = 0.0, dt: float = 1.0) -> PcaResult:
    """Leading eigenpair of a symmetric auto-covariance matrix.

    The eigenvector sign is fixed so its largest-|value| entry is positive.
    For a phase-insensitive mixture with single-photon weight p in one mode,
    the top eigenvalue is 1/2 + p.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("auto-covariance must be a square matrix")
    scale = float(np.max(np.abs(v))) or 1.0
    if float(np.max(np.abs(v - v.T))) > 1e-8 * scale:
        raise ValueError("auto-covariance must be symmetric")
    eigvals, eigvecs = np.linalg.eigh(v)
    vec = eigvecs[:, -1]
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    return PcaResult(
        mode=ModeFunction(vec, t0, dt),
        eigenvalue=float(eigvals[-1]),
        spectrum=eigvals[::-1].copy(),
    )


def pca_from_frames(
    fs: FrameSet,
    *,
    window: tuple[float, float] | None = None,
    bin_ns: float | None = None,
) -> PcaResult:
    """Auto-covariance + leading mode, optionally on a windowed/binned grid.

    With restriction, the eigenproblem runs in the coarse space but the
    returned mode is upsampled back to the frame grid (piecewise constant,
    exactly norm preserving) so downstream extraction needs no changes.
    """
    if window is None and bin_ns in (None, 1):
        return pca_leading_mode(autocovariance(fs), t0=fs.t0, dt=fs.dt)
    fsb = bin_frames(fs, (bin_ns or 1) * fs.dt, window)
    coarse = pca_leading_mode(autocovariance(fsb), t0=fsb.t0, dt=fsb.dt)
    b = int(round(fsb.dt / fs.dt))
    fine = np.repeat(coarse.mode.samples, b) / np.sqrt(b)
    return PcaResult(
        mode=ModeFunction(fine, fsb.t0, fs.dt),
        eigenvalue=coarse.eigenvalue,
        spectrum=coarse.spectrum,
    )


#: matched-analysis defaults: the estimator noise floor removes ~1.6 N/M of
#: the mode energy, so the leading mode is found in a window around the pulse
#: on a coarse grid rather than over the raw 1 GS/s record
PCA_COARSE_BIN = 8
PCA_BIN = 4
PCA_WINDOW_BEFORE_PEAK_NS = 74.0
PCA_WINDOW_AFTER_PEAK_NS = 276.0


def matched_window_pca(fs: FrameSet) -> PcaResult:
    """Two-pass PCA: coarse pass locates the pulse, fine pass runs on a
    matched window (4 ns bins) around it.  Deterministic given the frames."""
    if fs.n_samples < 4 * PCA_COARSE_BIN:
        return pca_from_frames(fs)
    coarse = pca_from_frames(fs, bin_ns=PCA_COARSE_BIN)
    peak_t = float(coarse.mode.times[int(np.argmax(np.abs(coarse.mode.samples)))])
    lo = max(fs.t0, peak_t - PCA_WINDOW_BEFORE_PEAK_NS)
    hi = min(fs.t0 + fs.n_samples * fs.dt, peak_t + PCA_WINDOW_AFTER_PEAK_NS)
    return pca_from_frames(fs, window=(lo, hi), bin_ns=PCA_BIN)


def _softmax(y: np.ndarray) -> np.ndarray:
    z = np.concatenate(([0.0], y))
    z = np.exp(z - z.max())
    return z / z.sum()


def mle_photon_distribution(
    samples: np.ndarray,
    n_max: int = DEFAULT_N_MAX,
    *,
    initial: FockDiagonalState | None = None,
    restarts: bool = True,
) -> MleResult:
    """Maximum-likelihood photon-number distribution from quadrature samples.

    Maximizes ``sum_j log sum_n c_n P_n(x_j)`` over the probability simplex
    with the downhill simplex method on a softmax reparameterization (the
    redundant degree of freedom is removed by pinning the vacuum logit).
    Convergence: mean-log-likelihood change below 1e-9 or 1e5 evaluations.

    Parameters
    ----------
    samples:
        Quadrature values; at least 1000 are required.
    n_max:
        Fock cutoff in [1, 10].
    initial:
        Optional starting distribution (used e.g. to warm-start bootstrap
        refits).  When given, ``restarts`` is ignored.
    restarts:
        Also start from vacuum-heavy and photon-heavy corners and keep the
        best final likelihood.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_MLE_SAMPLES:
        raise InsufficientDataError(f"need >= {MIN_MLE_SAMPLES} samples, got {x.size}")
    if not 1 <= n_max <= 10:
        raise ValueError(f"n_max must lie in [1, 10], got {n_max}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    if float(np.var(x)) < 1e-12:
        raise FitFailureError("degenerate samples: zero variance")

    # P_n(x_j), fixed throughout the optimization
    pdf_matrix = hermite_functions(n_max, x) ** 2

    def neg_mean_loglik(y: np.ndarray) -> float:
        mix = _softmax(y) @ pdf_matrix
        return -float(np.mean(np.log(np.maximum(mix, 1e-300))))

    def logits(c: np.ndarray) -> np.ndarray:
        safe = np.maximum(c, 1e-9)
        return np.log(safe[1:] / safe[0])

    if initial is not None:
        c0 = np.zeros(n_max + 1)
        take = min(initial.c.size, n_max + 1)
        c0[:take] = initial.c[:take]
        starts = [logits(c0)]
    else:
        starts = [np.zeros(n_max)]
        if restarts:
            vacuum_heavy = np.full(n_max + 1, 0.1 / n_max)
            vacuum_heavy[0] = 0.9
            photon_heavy = np.full(n_max + 1, 0.1 / n_max)
            photon_heavy[1] = 0.9
            starts += [logits(vacuum_heavy), logits(photon_heavy)]

    best = None
    total_evals = 0
    for y0 in starts:
        res = minimize(
            neg_mean_loglik,
            y0,
            method="Nelder-Mead",
            options={
                "xatol": 1e-7,
                "fatol": 1e-9,
                "maxfev": 100_000,
                "adaptive": True,
            },
        )
        total_evals += res.nfev
        if best is None or res.fun < best.fun:
            best = res

    c = _softmax(best.x)
    state = FockDiagonalState(c / c.sum())
    return MleResult(
        state=state,
        loglik=-best.fun * x.size,
        n_evals=total_evals,
        converged=bool(best.success),
    )


def bootstrap_purity(
    fs: FrameSet,
    psi0: ModeFunction,
    n_resamples: int = 40,
    *,
    n_max: int = DEFAULT_N_MAX,
    master_seed: int | None = None,
) -> float:
    """Bootstrap standard deviation of the single-photon weight c_1.

    Frames are resampled with replacement; extraction commutes with the
    resampling, so the extracted quadratures are resampled directly.  Refits
    warm-start at the full-data estimate.  More than 10% failed refits raise
    :class:`UnstableEstimateError`.
    """
    if n_resamples < 20:
        raise ValueError(f"need >= 20 resamples, got {n_resamples}")
    seed = fs.master_seed if master_seed is None else master_seed
    quads = extract_quadratures(fs, psi0)
    try:
        point = mle_photon_distribution(quads, n_max)
    except FitFailureError as exc:
        raise UnstableEstimateError(f"point estimate failed: {exc}") from exc

    values = []
    failures = 0
    for b in range(n_resamples):
        rng = seeds.stream(seed, seeds.DOMAIN_BOOTSTRAP, b)
        idx = rng.integers(0, quads.size, size=quads.size)
        try:
            refit = mle_photon_distribution(quads[idx], n_max, initial=point.state)
        except FitFailureError:
            failures += 1
            continue
        values.append(refit.state.c[1])
    if failures > 0.1 * n_resamples:
        raise UnstableEstimateError(
            f"{failures}/{n_resamples} bootstrap refits failed"
        )
    return float(np.std(values, ddof=1))


def fit_exponential_decay(points) -> DecayFit:
    """Nonlinear least squares of ``P(t) = P0 exp(-t/tau)`` (t in ns, tau in us).

    Initialized from the log-linear regression; unweighted, deterministic.
    Non-decreasing purity sequences are fitted anyway but flagged; tau beyond
    100x the time span is capped at that bound and flagged.
    """
    pts = [(float(t), float(p)) for t, p in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    t_ns = np.array([p[0] for p in pts])
    purity = np.array([p[1] for p in pts])
    if np.unique(t_ns).size != t_ns.size:
        raise ValueError("times must be distinct")
    if np.any((purity <= 0.0) | (purity > 1.0)):
        raise ValueError("purities must lie in (0, 1]")

    order = np.argsort(t_ns)
    t_us = t_ns[order] / 1000.0
    p_sorted = purity[order]
    warning = None
    if len(pts) >= 3 and np.all(np.diff(p_sorted) >= 0.0):
        warning = "purities are non-decreasing with storage time"

    span_us = float(t_us[-1] - t_us[0])
    cap = DECAY_TAU_CAP_FACTOR * span_us
    slope, intercept = np.polyfit(t_us, np.log(p_sorted), 1)
    tau0 = min(cap, -1.0 / slope) if slope < 0 else cap
    p00 = min(1.0, float(np.exp(intercept)))

    def model(t, p0, tau):
        return p0 * np.exp(-t / tau)

    try:
        with warnings.catch_warnings():
            # two points determine the two parameters exactly; the (unused)
            # parameter covariance is then undefined
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(
                model, t_us, p_sorted, p0=(p00, tau0), maxfev=20_000,
                bounds=((1e-12, 1e-12), (np.inf, np.inf)),
            )
        p0_fit, tau_fit = float(popt[0]), float(popt[1])
    except RuntimeError as exc:
        raise FitFailureError(f"decay fit did not converge: {exc}") from exc

    if tau_fit > cap:
        tau_fit = cap
        warning = (warning + "; " if warning else "") + "tau exceeds 100x the data span (capped)"
    residuals = p_sorted - model(t_us, p0_fit, tau_fit)
    return DecayFit(p0=p0_fit, tau_us=tau_fit, residuals=residuals, warning=warning)


def histogram_with_overlay(
    samples: np.ndarray, state: FockDiagonalState, bins: int = 60
) -> HistogramOverlay:
    """Density-normalized histogram with the fitted mixture on the same grid."""
    if bins < 10:
        raise ValueError(f"need at least 10 bins, got {bins}")
    x = np.asarray(samples, dtype=float).ravel()
    density, edges = np.histogram(x, bins=bins, density=True)
    centers = (edges[:-1] + edges[1:]) / 2.0
    model = state.c @ (hermite_functions(state.n_max, centers) ** 2)
    return HistogramOverlay(edges=edges, density=density, centers=centers, model=model)


def write_histogram_csv(overlay: HistogramOverlay, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "density", "model"])
        for x, d, m in zip(overlay.centers, overlay.density, overlay.model):
            writer.writerow([f"{x:.12g}", f"{d:.12g}", f"{m:.12g}"])


def build_tomography_report(
    quads: np.ndarray,
    *,
    n_max: int = DEFAULT_N_MAX,
    purity_err: float = 0.0,
    bins: int = 60,
) -> tuple[TomographyReport, MleResult]:
    """MLE + derived quantities for one batch of extracted quadratures."""
    mle = mle_photon_distribution(quads, n_max)
    report = TomographyReport(
        state=mle.state,
        loglik=mle.loglik,
        purity=float(mle.state.c[1]),
        purity_err=purity_err,
        wigner_origin=wigner_origin(mle.state),
        histogram=histogram_with_overlay(quads, mle.state, bins),
    )
    return report, mle
