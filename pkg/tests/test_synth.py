import math

import numpy as np
import pytest
from scipy.stats import kstest

from photonmem.estimation import mle_photon_distribution
from photonmem.fock import FockDiagonalState
from photonmem.modes import normalized_mode
from photonmem.synth import (
    AdcSpec,
    ImperfectionConfig,
    bin_frames,
    draw_fock_quadrature,
    extract_quadrature,
    extract_quadratures,
    load_frames,
    quantize_adc,
    save_frames,
    synth_condition,
    synth_frame,
    write_frames_csv,
)
import photonmem.seeds as seeds

from conftest import gaussian_mode


def p1_cdf(x):
    # exact CDF of the single-photon quadrature density 2x^2 e^{-x^2}/sqrt(pi)
    from scipy.special import erf

    return 0.5 * (1.0 + erf(x)) - x * np.exp(-(x**2)) / math.sqrt(math.pi)


@pytest.fixture(scope="module")
def mode():
    return gaussian_mode(center=60.0, sigma=12.0, t0=0.0, n=128)


class TestSynthFrame:
    def test_vacuum_per_bin_variance(self, mode):
        fs = synth_condition(FockDiagonalState.vacuum(), mode, 10_000, 11, n_samples=128)
        var = fs.frames.astype(float).var(axis=0)
        # variance of a variance estimate: ~ 0.5 sqrt(2/M); allow 3 sigma + binomial band
        band = 3.0 * 0.5 * math.sqrt(2.0 / 10_000)
        assert np.all(np.abs(var - 0.5) < band + 0.01)

    def test_single_photon_quadratures_match_p1(self, mode):
        fs = synth_condition(FockDiagonalState.fock(1), mode, 43_000, 12, n_samples=128)
        quads = extract_quadratures(fs, mode)
        assert kstest(quads, p1_cdf).pvalue > 0.01

    def test_orthogonal_mode_stays_vacuum(self, mode):
        fs = synth_condition(FockDiagonalState.fock(1), mode, 20_000, 13, n_samples=128)
        other = gaussian_mode(center=60.0, sigma=12.0, t0=0.0, n=128)
        # antisymmetric partner about the pulse center is orthogonal
        partner = normalized_mode(
            other.samples * np.sign(other.times - 60.0 + 0.25), 0.0, 1.0
        )
        assert abs(np.dot(partner.samples, mode.samples)) < 0.05
        ortho = normalized_mode(
            partner.samples - np.dot(partner.samples, mode.samples) * mode.samples, 0.0, 1.0
        )
        quads = extract_quadratures(fs, ortho)
        cdf = lambda x: 0.5 * (1.0 + np.vectorize(math.erf)(x))
        assert kstest(quads, cdf).pvalue > 0.01

    def test_mode_must_fit_frame(self, mode):
        rng = seeds.stream(0, seeds.DOMAIN_FRAME, 0)
        with pytest.raises(ValueError, match="exceeds the frame window"):
            synth_frame(FockDiagonalState.vacuum(), mode, rng, n_samples=64)

    def test_draw_counts_fixed_per_frame(self, mode):
        # same stream, same draws: the frame is a pure function of the stream
        a = synth_frame(
            FockDiagonalState.two_level(0.5), mode, seeds.stream(1, seeds.DOMAIN_FRAME, 5), n_samples=128
        )
        b = synth_frame(
            FockDiagonalState.two_level(0.5), mode, seeds.stream(1, seeds.DOMAIN_FRAME, 5), n_samples=128
        )
        np.testing.assert_array_equal(a, b)


class TestExtract:
    def test_projection_recovers_coefficient(self, mode):
        frame = 3.7 * np.zeros(128)
        frame = np.zeros(128)
        frame[: mode.n_samples] = 3.7 * mode.samples
        assert extract_quadrature(frame, mode) == pytest.approx(3.7, abs=1e-12)

    def test_orthogonal_frame_projects_to_zero(self, mode):
        frame = np.zeros(128)
        frame[0] = 5.0  # mode has negligible weight at the first sample
        assert abs(extract_quadrature(frame, mode)) < 1e-5

    def test_vacuum_ensemble_variance(self, mode):
        fs = synth_condition(FockDiagonalState.vacuum(), mode, 10_000, 14, n_samples=128)
        var = float(np.var(extract_quadratures(fs, mode)))
        assert var == pytest.approx(0.5, abs=0.03)

    def test_grid_mismatch_rejected(self, mode):
        fs = synth_condition(FockDiagonalState.vacuum(), mode, 2, 15, n_samples=128)
        shifted = normalized_mode(mode.samples, 0.5, 1.0)
        with pytest.raises(ValueError, match="misaligned"):
            extract_quadratures(fs, shifted)


class TestFockSampler:
    @pytest.mark.parametrize("n,var", [(0, 0.5), (1, 1.5), (2, 2.5), (3, 3.5)])
    def test_moments(self, n, var):
        rng = np.random.default_rng(16)
        x = draw_fock_quadrature(n, rng, 400_000)
        assert float(np.mean(x)) == pytest.approx(0.0, abs=0.02)
        assert float(np.var(x)) == pytest.approx(var, rel=0.02)


class TestQuantizeAdc:
    def test_values_on_levels_unchanged(self):
        spec = AdcSpec(bits=3, full_scale=1.0)
        step = 2.0 / 8
        levels = (np.arange(-4, 4) + 0.5) * step
        np.testing.assert_allclose(quantize_adc(levels, 3, 1.0), levels, atol=1e-15)

    def test_saturation(self):
        step = 2.0 / 8
        top = 3.5 * step  # mid-rise rails are symmetric: +-(2^bits/2 - 1/2) steps
        assert quantize_adc(np.array([10.0]), 3, 1.0)[0] == pytest.approx(top)
        assert quantize_adc(np.array([-10.0]), 3, 1.0)[0] == pytest.approx(-top)

    def test_monotone(self):
        x = np.linspace(-2, 2, 1001)
        q = quantize_adc(x, 8, 1.5)
        assert np.all(np.diff(q) >= 0)

    def test_quantization_barely_moves_mle(self, mode):
        # same seed with and without the 8-bit ADC: the c1 estimate moves
        # by far less than the 0.01 budget
        state = FockDiagonalState.two_level(0.582)
        raw = synth_condition(state, mode, 15_000, 17, n_samples=128)
        q = synth_condition(state, mode, 15_000, 17, n_samples=128, adc=AdcSpec())
        c1_raw = float(mle_photon_distribution(extract_quadratures(raw, mode), 5).state.c[1])
        c1_q = float(mle_photon_distribution(extract_quadratures(q, mode), 5).state.c[1])
        assert abs(c1_raw - c1_q) <= 0.01

    def test_bits_validated(self):
        with pytest.raises(ValueError):
            quantize_adc(np.zeros(4), 1, 1.0)


class TestImperfections:
    def test_displacement_shifts_mode_quadrature(self, mode):
        alpha = 0.5 + 0.3j
        imp = ImperfectionConfig(displacement=alpha)
        fs = synth_condition(FockDiagonalState.vacuum(), mode, 20_000, 18, n_samples=128, imperfections=imp)
        mean = float(np.mean(extract_quadratures(fs, mode)))
        assert mean == pytest.approx(math.sqrt(2.0) * alpha.real, abs=3.0 * math.sqrt(0.5 / 20_000) + 0.01)

    def test_extra_loss_degrades_purity(self, mode):
        state = FockDiagonalState.two_level(0.8)
        imp = ImperfectionConfig(extra_loss=0.5)
        fs = synth_condition(state, mode, 30_000, 19, n_samples=128, imperfections=imp)
        c1 = float(mle_photon_distribution(extract_quadratures(fs, mode), 5).state.c[1])
        assert c1 == pytest.approx(0.4, abs=0.02)

    def test_detuning_attenuates_purity(self, mode):
        from photonmem.modes import detuning_overlap_penalty

        delta, phase = 2 * math.pi * 3e6, 0.0
        imp = ImperfectionConfig(detuning=(delta, phase))
        state = FockDiagonalState.fock(1)
        fs = synth_condition(state, mode, 30_000, 20, n_samples=128, imperfections=imp)
        c1 = float(mle_photon_distribution(extract_quadratures(fs, mode), 5).state.c[1])
        penalty = detuning_overlap_penalty(mode, delta, phase)
        assert penalty < 0.99  # 3 MHz over a wide pulse is no longer harmless
        assert c1 == pytest.approx(penalty, abs=0.025)

    def test_electronic_noise_adds_variance(self, mode):
        noisy = ImperfectionConfig(electronic_noise_std=0.3)
        fs = synth_condition(
            FockDiagonalState.vacuum(), mode, 8_000, 30, n_samples=128, imperfections=noisy
        )
        var = float(fs.frames.astype(float).var())
        assert var == pytest.approx(0.5 + 0.09, abs=0.02)

    def test_loss_range_validated(self):
        with pytest.raises(ValueError):
            ImperfectionConfig(extra_loss=1.2)
        with pytest.raises(ValueError):
            ImperfectionConfig(electronic_noise_std=-0.1)


class TestDeterminism:
    def test_same_seed_bit_identical(self, mode):
        a = synth_condition(FockDiagonalState.two_level(0.5), mode, 500, 21, n_samples=128)
        b = synth_condition(FockDiagonalState.two_level(0.5), mode, 500, 21, n_samples=128)
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_workers_do_not_change_bytes(self, mode):
        kw = dict(n_samples=128, adc=AdcSpec())
        a = synth_condition(FockDiagonalState.two_level(0.5), mode, 501, 22, n_workers=1, **kw)
        b = synth_condition(FockDiagonalState.two_level(0.5), mode, 501, 22, n_workers=4, **kw)
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_zero_frames_rejected(self, mode):
        with pytest.raises(ValueError):
            synth_condition(FockDiagonalState.vacuum(), mode, 0, 23, n_samples=128)


class TestAutocovarianceContract:
    def test_vacuum_autocovariance_is_isotropic(self, mode):
        from photonmem.estimation import autocovariance

        m_frames = 20_000
        small = gaussian_mode(center=30.0, sigma=8.0, t0=0.0, n=64)
        fs = synth_condition(FockDiagonalState.vacuum(), small, m_frames, 24, n_samples=64)
        v = autocovariance(fs)
        off = v - np.diag(np.diag(v))
        assert np.max(np.abs(np.diag(v) - 0.5)) < 5.0 / math.sqrt(m_frames)
        assert np.max(np.abs(off)) < 5.0 / math.sqrt(m_frames)


class TestFrameIo:
    def test_binary_round_trip(self, tmp_path, mode):
        fs = synth_condition(
            FockDiagonalState.two_level(0.5), mode, 50, 25, n_samples=128, adc=AdcSpec()
        )
        path = tmp_path / "frames.bin"
        save_frames(fs, path)
        back = load_frames(path)
        np.testing.assert_array_equal(back.frames, fs.frames)
        assert back.t0 == fs.t0
        assert back.dt == fs.dt
        assert back.master_seed == fs.master_seed
        assert back.adc == fs.adc

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 60)
        with pytest.raises(ValueError, match="magic"):
            load_frames(path)

    def test_csv_export(self, tmp_path, mode):
        fs = synth_condition(FockDiagonalState.vacuum(), mode, 3, 26, n_samples=128)
        path = tmp_path / "frames.csv"
        write_frames_csv(fs, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "frame,t_ns,x"
        assert len(lines) == 1 + 3 * 128


class TestBinFrames:
    def test_vacuum_variance_preserved(self, mode):
        fs = synth_condition(FockDiagonalState.vacuum(), mode, 8_000, 27, n_samples=128)
        binned = bin_frames(fs, 4.0)
        var = binned.frames.astype(float).var(axis=0)
        assert np.all(np.abs(var - 0.5) < 0.05)

    def test_extraction_commutes_with_binning(self, mode):
        from photonmem.estimation import pca_from_frames

        fs = synth_condition(FockDiagonalState.two_level(0.6), mode, 4_000, 28, n_samples=128)
        pca = pca_from_frames(fs, bin_ns=4)
        # the upsampled mode on fine frames equals the coarse mode on binned frames
        fine = extract_quadratures(fs, pca.mode)
        binned = bin_frames(fs, 4.0)
        coarse_mode = normalized_mode(
            pca.mode.samples.reshape(-1, 4).sum(axis=1) / 2.0, binned.t0, 4.0
        )
        coarse = extract_quadratures(binned, coarse_mode)
        np.testing.assert_allclose(fine, coarse, atol=1e-5)

    def test_bad_bin_rejected(self, mode):
        fs = synth_condition(FockDiagonalState.vacuum(), mode, 2, 29, n_samples=128)
        with pytest.raises(ValueError):
            bin_frames(fs, 0.5)
