"""Synthetic homodyne frames: one excited temporal mode inside multimode vacuum.

Each frame is a length-N record of instantaneous quadratures on a 1 ns grid.
In the sqrt(dt) sample convention the vacuum contributes i.i.d. Gaussian noise
of variance 1/2 per bin; the excited mode's quadrature is drawn from the
photon-number mixture and swapped in along the mode direction::

    frame = w - (psi . w) psi + x_psi psi,   w ~ N(0, 1/2)^N

so a weighted integral with psi recovers exactly ``x_psi`` and any orthogonal
mode stays vacuum-distributed.  Frames are stored as float32 -- the same
precision as the binary file format -- which keeps file-mediated pipelines
bit-identical to in-process ones.
"""

from __future__ import annotations

import csv
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import seeds
from .fock import FockDiagonalState, apply_loss, hermite_functions
from .modes import GRID_TOL, ModeFunction, detuned_effective_mode

VACUUM_SIGMA = float(np.sqrt(0.5))
#: oscilloscope range: 10 vacuum standard deviations keeps the saturation
#: probability below 1e-12 for the states in scope
DEFAULT_FULL_SCALE = float(10 * VACUUM_SIGMA)

_MAGIC = b"HMFR"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQddBBdQ")


@dataclass(frozen=True)
class AdcSpec:
    """Uniform mid-rise quantizer with 2^bits levels over +-full_scale."""

    bits: int = 8
    full_scale: float = DEFAULT_FULL_SCALE

    def __post_init__(self):
        if not 2 <= self.bits <= 16:
            raise ValueError(f"bits must lie in [2, 16], got {self.bits}")
        if not self.full_scale > 0:
            raise ValueError("full_scale must be positive")


@dataclass(frozen=True)
class ImperfectionConfig:
    """Optional measurement imperfections.

    displacement: complex coherent contamination of the excited mode (adds
        sqrt(2) Re(alpha) to its quadrature).
    detuning: (delta rad/s, phase rad) rotation of the excited mode relative
        to the LO frame; the embedded mode becomes its in-phase projection.
    extra_loss: transmission in [0, 1] applied to the photon statistics.
    electronic_noise_std: additive Gaussian detector noise per sample, in
        quadrature units (off by default: shot noise dominates by ~20 dB).
    """

    displacement: complex | None = None
    detuning: tuple[float, float] | None = None
    extra_loss: float = 1.0
    electronic_noise_std: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.extra_loss <= 1.0:
            raise ValueError(f"extra_loss must lie in [0, 1], got {self.extra_loss}")
        if self.electronic_noise_std < 0.0:
            raise ValueError("electronic_noise_std must be non-negative")


@dataclass(frozen=True)
class FrameSet:
    """M x N batch of quadrature frames plus grid/ADC/seed metadata."""

    frames: np.ndarray
    t0: float
    dt: float
    adc: AdcSpec | None
    master_seed: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.frames, dtype=np.float32)
        arr.flags.writeable = False
        object.__setattr__(self, "frames", arr)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("frames must be a non-empty M x N matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("frames must be finite")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_samples(self) -> int:
        return self.frames.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)


@lru_cache(maxsize=64)
def _fock_inverse_cdf(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tabulated inverse CDF of the n-photon quadrature density."""
    x_max = np.sqrt(2.0 * n + 1.0) + 6.0
    x = np.linspace(-x_max, x_max, 60001)
    pdf = hermite_functions(n, x)[n] ** 2
    cdf = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(x))))
    cdf /= cdf[-1]
    return cdf, x


def draw_fock_quadrature(n: int, rng: np.random.Generator, size=None):
    """Sample quadratures of the n-photon state (one uniform draw per sample)."""
    if n == 0:
        return rng.normal(0.0, VACUUM_SIGMA, size)
    cdf, x = _fock_inverse_cdf(n)
    return np.interp(rng.random(size), cdf, x)


def _mode_indices(psi: ModeFunction, t0: float, n_samples: int, dt: float) -> slice:
    """Column slice of the frame grid covered by psi; error on misalignment."""
    if abs(psi.dt - dt) > GRID_TOL * dt:
        raise ValueError(f"mode dt {psi.dt} does not match frame dt {dt}")
    start = (psi.t0 - t0) / dt
    if abs(start - round(start)) > GRID_TOL:
        raise ValueError("mode grid is misaligned with the frame grid")
    i0 = int(round(start))
    i1 = i0 + psi.n_samples
    if i0 < 0 or i1 > n_samples:
        raise ValueError(
            f"mode support [{psi.t0}, {psi.t_end}] ns exceeds the frame window"
        )
    return slice(i0, i1)


def synth_frame(
    state: FockDiagonalState,
    psi: ModeFunction,
    rng: np.random.Generator,
    *,
    t0: float = 0.0,
    n_samples: int = 1000,
    dt: float = 1.0,
    imperfections: ImperfectionConfig | None = None,
) -> np.ndarray:
    """Draw one homodyne frame with ``state`` excited in mode ``psi``.

    Draw order per frame is fixed (N vacuum normals, one photon-number
    uniform, one quadrature draw) so a given RNG stream always yields the
    same frame.
    """
    imp = imperfections or ImperfectionConfig()
    if imp.extra_loss < 1.0:
        state = apply_loss(state, imp.extra_loss)
    if imp.detuning is not None:
        psi = detuned_effective_mode(psi, *imp.detuning)
    cols = _mode_indices(psi, t0, n_samples, dt)

    w = rng.normal(0.0, VACUUM_SIGMA, n_samples)
    n = int(np.searchsorted(np.cumsum(state.c), rng.random(), side="right"))
    n = min(n, state.n_max)
    x_psi = float(draw_fock_quadrature(n, rng))
    if imp.displacement is not None:
        x_psi += np.sqrt(2.0) * np.real(imp.displacement)

    frame = w
    frame[cols] += (x_psi - float(np.dot(psi.samples, w[cols]))) * psi.samples
    if imp.electronic_noise_std > 0.0:
        frame += rng.normal(0.0, imp.electronic_noise_std, n_samples)
    return frame


def quantize_adc(values: np.ndarray, bits: int, full_scale: float) -> np.ndarray:
    """Mid-rise uniform quantization over [-full_scale, +full_scale].

    Output levels are ``(k + 1/2) step`` for integer k; inputs beyond the
    range saturate at the outermost levels.
    """
    spec = AdcSpec(bits, full_scale)  # reuse validation
    step = 2.0 * spec.full_scale / (1 << spec.bits)
    k = np.floor(np.asarray(values, dtype=float) / step)
    top = (1 << (spec.bits - 1)) - 1
    k = np.clip(k, -top - 1, top)
    return (k + 0.5) * step


def synth_condition(
    state: FockDiagonalState,
    psi: ModeFunction,
    n_frames: int,
    master_seed: int,
    *,
    t0: float = 0.0,
    n_samples: int = 1000,
    dt: float = 1.0,
    imperfections: ImperfectionConfig | None = None,
    adc: AdcSpec | None = None,
    n_workers: int = 1,
) -> FrameSet:
    """Generate ``n_frames`` independent frames for one experimental condition.

    Frame ``i`` is drawn from its own counter-based stream derived from
    ``(master_seed, i)``, so the result is bit-identical no matter how the
    work is chunked across workers.
    """
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    imp = imperfections or ImperfectionConfig()
    eff_state = apply_loss(state, imp.extra_loss) if imp.extra_loss < 1.0 else state
    eff_psi = detuned_effective_mode(psi, *imp.detuning) if imp.detuning else psi
    _mode_indices(eff_psi, t0, n_samples, dt)  # validate once up front
    inner = ImperfectionConfig(
        displacement=imp.displacement, electronic_noise_std=imp.electronic_noise_std
    )

    out = np.empty((n_frames, n_samples), dtype=np.float32)

    def fill(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            rng = seeds.stream(master_seed, seeds.DOMAIN_FRAME, i)
            frame = synth_frame(
                eff_state, eff_psi, rng,
                t0=t0, n_samples=n_samples, dt=dt, imperfections=inner,
            )
            if adc is not None:
                frame = quantize_adc(frame, adc.bits, adc.full_scale)
            out[i] = frame

    if n_workers <= 1:
        fill(0, n_frames)
    else:
        chunk = -(-n_frames // n_workers)
        bounds = [(k, min(k + chunk, n_frames)) for k in range(0, n_frames, chunk)]
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(lambda b: fill(*b), bounds))

    return FrameSet(out, t0=t0, dt=dt, adc=adc, master_seed=master_seed)


def bin_frames(fs: FrameSet, bin_ns: float, window: tuple[float, float] | None = None) -> FrameSet:
    """Coarse-grain frames in time: boxcar sums normalized by sqrt(bin size).

    The normalization makes binning an isometry onto the coarse subspace, so
    vacuum bins stay at variance 1/2 and mode quadratures are preserved up to
    the (small) energy the mode carries beyond the coarse resolution.  The
    window is half-open ``[lo, hi)`` on the frame grid; ADC metadata is
    dropped since binned samples no longer sit on quantizer levels.
    """
    per_bin = bin_ns / fs.dt
    if abs(per_bin - round(per_bin)) > GRID_TOL or per_bin < 1:
        raise ValueError(f"bin size {bin_ns} ns must be a positive multiple of dt = {fs.dt} ns")
    b = int(round(per_bin))
    if window is None:
        i0, i1 = 0, fs.n_samples
    else:
        lo, hi = window
        i0 = int(np.ceil((lo - fs.t0) / fs.dt - GRID_TOL))
        i1 = int(np.floor((hi - fs.t0) / fs.dt + GRID_TOL))
        i0, i1 = max(0, i0), min(fs.n_samples, i1)
    n_bins = (i1 - i0) // b
    if n_bins < 2:
        raise ValueError("window too short for the requested binning")
    seg = fs.frames[:, i0 : i0 + n_bins * b]
    binned = seg.reshape(fs.n_frames, n_bins, b).sum(axis=2) / np.float32(np.sqrt(b))
    return FrameSet(
        binned, t0=fs.t0 + i0 * fs.dt, dt=b * fs.dt, adc=None, master_seed=fs.master_seed
    )


def extract_quadrature(frame: np.ndarray, psi0: ModeFunction, *, t0: float = 0.0, dt: float = 1.0) -> float:
    """Weighted integral ``sum_i psi0_i frame_i`` of one frame."""
    frame = np.asarray(frame)
    if frame.ndim != 1:
        raise ValueError("frame must be 1-D; use extract_quadratures for a FrameSet")
    cols = _mode_indices(psi0, t0, frame.shape[0], dt)
    return float(np.dot(frame[cols].astype(float), psi0.samples))


def extract_quadratures(fs: FrameSet, psi0: ModeFunction) -> np.ndarray:
    """Mode quadrature of every frame in the set (float64)."""
    cols = _mode_indices(psi0, fs.t0, fs.n_samples, fs.dt)
    return fs.frames[:, cols].astype(np.float64) @ psi0.samples


def save_frames(fs: FrameSet, path: str | Path) -> None:
    """Write the binary frame format: fixed header + row-major float32 data."""
    adc = fs.adc
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        fs.n_frames,
        fs.n_samples,
        fs.t0,
        fs.dt,
        1 if adc else 0,
        adc.bits if adc else 0,
        adc.full_scale if adc else 0.0,
        fs.master_seed & 0xFFFFFFFFFFFFFFFF,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(fs.frames, dtype="<f4").tobytes())


def load_frames(path: str | Path) -> FrameSet:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, m, n, t0, dt, adc_flag, bits, full_scale, seed = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a frame file (bad magic {magic!r})")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(4 * m * n), dtype="<f4")
    if data.size != m * n:
        raise ValueError(f"{path}: truncated data section")
    adc = AdcSpec(bits, full_scale) if adc_flag else None
    return FrameSet(data.reshape(m, n), t0=t0, dt=dt, adc=adc, master_seed=seed)


def write_frames_csv(fs: FrameSet, path: str | Path) -> None:
    """Long-form CSV export (``frame, t_ns, x``); intended for small sets."""
    times = fs.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "t_ns", "x"])
        for i in range(fs.n_frames):
            for t, v in zip(times, fs.frames[i]):
                writer.writerow([i, f"{t:.12g}", f"{v:.9g}"])
