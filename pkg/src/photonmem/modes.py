"""Discretized temporal mode functions and their inner-product algebra.

A mode is stored as ``psi_i = psi(t_i) * sqrt(dt)`` so that normalization and
inner products are plain dot products, directly comparable with eigenvectors
of a sampled auto-covariance matrix.  Sample ``i`` sits at ``t_i = t0 + i*dt``
(nanoseconds); values outside the stored window are exactly zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError

NORM_TOL = 1e-9
#: fraction of dt by which times may miss the grid before we reject them
GRID_TOL = 1e-6


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ModeFunction:
    """Real temporal envelope, unit norm in the sqrt(dt) convention."""

    samples: np.ndarray
    t0: float
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_readonly(self.samples))
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("mode samples must be finite")
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        norm = float(np.sum(self.samples**2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"mode is not normalized: sum(psi^2) = {norm!r}")

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def t_end(self) -> float:
        """Time of the last stored sample."""
        return self.t0 + self.dt * (self.samples.size - 1)


@dataclass(frozen=True)
class ComplexEnvelope:
    """Complex envelope before projection onto the (real) local-oscillator frame."""

    re: np.ndarray
    im: np.ndarray
    t0: float
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "re", _as_readonly(self.re))
        object.__setattr__(self, "im", _as_readonly(self.im))
        if self.re.shape != self.im.shape or self.re.ndim != 1:
            raise ValueError("re and im must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.re)) and np.all(np.isfinite(self.im))):
            raise ValueError("envelope samples must be finite")
        norm = float(np.sum(self.re**2 + self.im**2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"complex envelope not normalized: {norm!r}")

    @property
    def values(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.re.size)

    def to_real_mode(self) -> tuple["ModeFunction", float]:
        """Project onto a real mode by an energy-maximizing global phase.

        Rotates by the phase that maximizes ``sum(Re part)^2``, takes the real
        part, renormalizes, and fixes the sign so the largest-|value| entry is
        positive.  Returns the mode and the energy fraction it retains.
        """
        z = self.values
        # sum(Re(z e^{i theta})^2) = |z|^2/2 + Re(e^{2i theta} sum z^2)/2
        s = np.sum(z**2)
        theta = -0.5 * np.angle(s) if s != 0 else 0.0
        real_part = np.real(z * np.exp(1j * theta))
        kept = float(np.sum(real_part**2))
        if kept < 1e-12:
            raise DegenerateInputError("real projection retains no energy")
        psi = real_part / np.sqrt(kept)
        if psi[np.argmax(np.abs(psi))] < 0:
            psi = -psi
        return ModeFunction(psi, self.t0, self.dt), kept


def normalized_mode(samples, t0: float, dt: float = 1.0) -> ModeFunction:
    """Build a ModeFunction from raw samples, normalizing them first."""
    arr = np.asarray(samples, dtype=float)
    norm = float(np.sum(arr**2))
    if norm < 1e-24:
        raise DegenerateInputError("cannot normalize: zero-energy samples")
    return ModeFunction(arr / np.sqrt(norm), t0, dt)


def complex_envelope(values, t0: float, dt: float = 1.0) -> ComplexEnvelope:
    """Build a normalized ComplexEnvelope from complex samples."""
    z = np.asarray(values, dtype=complex)
    norm = float(np.sum(np.abs(z) ** 2))
    if norm < 1e-24:
        raise DegenerateInputError("cannot normalize: zero-energy samples")
    z = z / np.sqrt(norm)
    return ComplexEnvelope(z.real, z.imag, t0, dt)


def _grid_offset(a: ModeFunction, b: ModeFunction) -> int:
    """Integer sample offset of b's grid relative to a's; error if misaligned."""
    if abs(a.dt - b.dt) > GRID_TOL * a.dt:
        raise ValueError(f"sample intervals differ: {a.dt} vs {b.dt}")
    shift = (b.t0 - a.t0) / a.dt
    offset = round(shift)
    if abs(shift - offset) > GRID_TOL:
        raise ValueError(f"grids misaligned by {shift - offset} samples")
    return int(offset)


def inner_product(a: ModeFunction, b: ModeFunction) -> float:
    """Discrete inner product ``sum_i a_i b_i`` on the common grid.

    Supports may differ; non-overlapping parts contribute zero.
    """
    off = _grid_offset(a, b)
    # b's sample j lies at a-grid index j + off
    lo = max(0, off)
    hi = min(a.n_samples, off + b.n_samples)
    if hi <= lo:
        return 0.0
    return float(np.dot(a.samples[lo:hi], b.samples[lo - off : hi - off]))


def overlap_sq(a: ModeFunction, b: ModeFunction) -> float:
    """Squared overlap |(a, b)|^2; equals 1 for identical normalized modes."""
    return inner_product(a, b) ** 2


def time_shift(m: ModeFunction, delta_t: float) -> ModeFunction:
    """Shift a mode by an integer multiple of its sample interval."""
    steps = delta_t / m.dt
    if abs(steps - round(steps)) > GRID_TOL:
        raise ValueError(f"shift {delta_t} ns is not a multiple of dt = {m.dt} ns")
    return ModeFunction(m.samples, m.t0 + round(steps) * m.dt, m.dt)


def clip_and_renormalize(m: ModeFunction, window: tuple[float, float]) -> ModeFunction:
    """Restrict a mode to samples with ``t_lo <= t_i <= t_hi`` and renormalize."""
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError(f"empty window {window}")
    times = m.times
    keep = np.nonzero((times >= t_lo - GRID_TOL * m.dt) & (times <= t_hi + GRID_TOL * m.dt))[0]
    if keep.size == 0:
        raise DegenerateInputError("window does not overlap the mode support")
    seg = m.samples[keep[0] : keep[-1] + 1]
    norm = float(np.sum(seg**2))
    if norm <= 1e-12:
        raise DegenerateInputError(f"energy inside window is {norm!r}")
    if abs(norm - 1.0) > 1e-15:  # keep repeated clips bitwise stable
        seg = seg / np.sqrt(norm)
    return ModeFunction(seg, float(times[keep[0]]), m.dt)


def _centroid_time(m: ModeFunction) -> float:
    """Intensity-weighted mean arrival time (ns)."""
    return float(np.sum(m.samples**2 * m.times))


def detuning_overlap_penalty(m: ModeFunction, delta_rad_s: float, phase: float) -> float:
    """Purity factor for measuring a detuned mode in a fixed LO frame.

    The mode rotates as ``m(t) e^{i(delta (t - t_c) + phase)}`` with the phase
    referenced to the pulse centroid ``t_c`` (the absolute phase accumulated
    before the pulse is folded into ``phase``).  Only the in-phase part
    couples to a quadrature measurement weighted by ``m`` itself, so the
    single-photon weight scales by ``(sum_i m_i^2 cos(...))^2``: 1 when the
    rotation is negligible across the pulse, 0 for a pure quadrature rotation.
    """
    rel_t_s = (m.times - _centroid_time(m)) * 1e-9
    proj = float(np.sum(m.samples**2 * np.cos(delta_rad_s * rel_t_s + phase)))
    return proj**2


def detuned_effective_mode(m: ModeFunction, delta_rad_s: float, phase: float) -> ModeFunction:
    """Normalized in-phase component of a rotating mode, as seen by the LO.

    Uses the same centroid-referenced rotation as
    :func:`detuning_overlap_penalty`.
    """
    rel_t_s = (m.times - _centroid_time(m)) * 1e-9
    raw = m.samples * np.cos(delta_rad_s * rel_t_s + phase)
    norm = float(np.sum(raw**2))
    if norm < 1e-12:
        raise DegenerateInputError("detuned mode has no in-phase component")
    return ModeFunction(raw / np.sqrt(norm), m.t0, m.dt)


def orthonormalize(modes: list[ModeFunction]) -> list[ModeFunction]:
    """Gram-Schmidt on modes sharing one grid (same t0, dt and length)."""
    first = modes[0]
    for m in modes[1:]:
        if _grid_offset(first, m) != 0 or m.n_samples != first.n_samples:
            raise ValueError("orthonormalize requires modes on an identical grid")
    basis: list[np.ndarray] = []
    for m in modes:
        vec = m.samples.copy()
        for prev in basis:
            vec -= np.dot(prev, vec) * prev
        norm = float(np.sum(vec**2))
        if norm < 1e-12:
            raise DegenerateInputError("modes are linearly dependent")
        basis.append(vec / np.sqrt(norm))
    return [ModeFunction(vec, first.t0, first.dt) for vec in basis]


def gram_matrix(modes: list[ModeFunction]) -> np.ndarray:
    """Matrix of pairwise inner products."""
    n = len(modes)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = inner_product(modes[i], modes[j])
    return g


def write_mode_csv(m: ModeFunction, path: str | Path) -> None:
    """Write a mode as ``t_ns, psi`` rows with a header line."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ns", "psi"])
        for t, v in zip(m.times, m.samples):
            writer.writerow([f"{t:.12g}", f"{v:.12g}"])


def read_mode_csv(path: str | Path) -> ModeFunction:
    """Read a mode written by :func:`write_mode_csv` (header required)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["t_ns", "psi"]:
            raise ValueError(f"{path}: expected header 't_ns, psi'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two samples")
    t = np.array([r[0] for r in rows])
    dt = float(t[1] - t[0])
    if dt <= 0 or np.max(np.abs(np.diff(t) - dt)) > GRID_TOL * dt:
        raise ValueError(f"{path}: time column is not a uniform grid")
    return normalized_mode([r[1] for r in rows], float(t[0]), dt)
