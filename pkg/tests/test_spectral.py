import numpy as np
import pytest

from cohtree.errors import (
    InsufficientDataError,
    NumericalDegeneracyError,
    ValidationError,
)
from cohtree.series import standardize
from cohtree.spectral import (
    CoherenceSpectrum,
    SpectralConfig,
    coherence,
    coherence_from_spectra,
    welch_csd,
    welch_psd,
)


def white(n, seed):
    return standardize(np.random.default_rng(seed).standard_normal(n))


def ar1_path(phi, n, seed):
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = eps[0] / np.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + eps[t]
    return x


class TestConfig:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValidationError):
            SpectralConfig(segment_length=500)

    def test_rejects_tiny_segment(self):
        with pytest.raises(ValidationError):
            SpectralConfig(segment_length=8)

    def test_rejects_bad_overlap(self):
        with pytest.raises(ValidationError):
            SpectralConfig(overlap_fraction=1.0)
        with pytest.raises(ValidationError):
            SpectralConfig(overlap_fraction=-0.1)

    def test_rejects_unknown_window(self):
        with pytest.raises(ValidationError):
            SpectralConfig(window="kaiser")

    def test_rejects_small_grid(self):
        with pytest.raises(ValidationError):
            SpectralConfig(segment_length=64, grid_size=16)

    def test_segment_count(self):
        cfg = SpectralConfig(segment_length=512, overlap_fraction=0.5)
        assert cfg.stride == 256
        assert cfg.n_segments(8192) == 31
        assert cfg.n_segments(512) == 1
        assert cfg.n_segments(511) == 0

    def test_frequency_grid(self):
        cfg = SpectralConfig(segment_length=64)
        w = cfg.frequencies()
        assert len(w) == 33
        assert w[0] == 0.0
        assert w[-1] == pytest.approx(np.pi, abs=1e-15)
        assert np.allclose(np.diff(w), 2.0 * np.pi / 64, atol=1e-15)

    def test_grid_size_refines_grid(self):
        cfg = SpectralConfig(segment_length=64, grid_size=129)
        assert cfg.nfft == 256
        assert len(cfg.frequencies()) == 129


class TestWelchPsd:
    def test_white_noise_is_flat(self):
        # unit-variance white input: density near 1 pointwise, mean near 1
        for seed in range(20):
            est = welch_psd(white(8192, seed))
            assert est.values.min() > 0.10
            assert est.values.max() < 2.25
            assert 0.95 < est.grid_mean() < 1.05

    def test_cosine_peaks_at_its_bin(self):
        n, bin_index = 4096, 32
        t = np.arange(n)
        x = np.cos(2.0 * np.pi * bin_index * t / 512)
        est = welch_psd(x, SpectralConfig(segment_length=512))
        assert int(np.argmax(est.values)) == bin_index

    def test_quadratic_scaling(self):
        x = white(4096, 1)
        a = welch_psd(x).values
        b = welch_psd(2.0 * x).values
        assert np.allclose(b, 4.0 * a, rtol=1e-12, atol=1e-14)

    def test_grid_mean_tracks_variance(self):
        # Parseval: the extended-grid mean recovers the input variance
        x = white(4096, 2)
        assert 0.9 < welch_psd(x).grid_mean() / x.var() < 1.1
        y = ar1_path(0.5, 8192, 3)
        assert 0.9 < welch_psd(y).grid_mean() / y.var() < 1.1

    def test_values_nonnegative_finite(self):
        est = welch_psd(ar1_path(0.8, 4096, 4))
        assert np.all(est.values >= 0)
        assert np.all(np.isfinite(est.values))

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientDataError):
            welch_psd(white(100, 0), SpectralConfig(segment_length=512))

    def test_grid_size_override(self):
        x = white(4096, 5)
        est = welch_psd(x, SpectralConfig(segment_length=256, grid_size=513))
        assert len(est.values) == 513
        assert 0.9 < est.grid_mean() / x.var() < 1.1


class TestWelchCsd:
    def test_self_csd_is_psd(self):
        x = white(4096, 6)
        cfg = SpectralConfig()
        auto = welch_csd(x, x, cfg)
        psd = welch_psd(x, cfg)
        assert np.array_equal(auto.values.real, psd.values)
        assert np.abs(auto.values.imag).max() < 1e-12

    def test_swap_conjugates(self):
        x, y = white(4096, 7), white(4096, 8)
        a = welch_csd(x, y).values
        b = welch_csd(y, x).values
        assert np.allclose(b, np.conj(a), rtol=0, atol=1e-12)

    def test_circular_delay_exact_phase(self):
        # one rectangular segment covering the whole series: the DFT shift
        # theorem holds exactly, so csd * exp(+i*d*omega) must be real
        rng = np.random.default_rng(9)
        x = rng.standard_normal(64)
        y = np.roll(x, 3)
        cfg = SpectralConfig(segment_length=64, window="rectangular")
        est = welch_csd(x, y, cfg)
        rotated = est.values * np.exp(1j * 3.0 * est.frequencies)
        assert np.abs(rotated.imag).max() < 1e-9
        assert rotated.real.min() > -1e-12

    def test_segment_averaged_phase_slope(self):
        for seed in range(3):
            x = white(8192, 20 + seed)
            y = np.roll(x, 1)
            est = welch_csd(x, y)
            phase = np.unwrap(np.angle(est.values[1:]))
            slope = np.polyfit(est.frequencies[1:], phase, 1)[0]
            assert abs(slope + 1.0) < 0.01

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            welch_csd(white(1024, 0), white(2048, 1))

    def test_2d_input_rejected(self):
        with pytest.raises(ValidationError):
            welch_csd(np.zeros((4, 512)), np.zeros((4, 512)))


class TestCoherence:
    def test_self_coherence_is_one(self):
        x = white(4096, 10)
        c = coherence(x, x.copy())
        assert np.abs(c.values - 1.0).max() < 1e-12

    def test_values_clamped_to_unit_interval(self):
        c = coherence(white(2048, 11), white(2048, 12))
        assert c.values.min() >= 0.0
        assert c.values.max() <= 1.0

    def test_delayed_copy_high_coherence(self):
        for seed in range(10):
            x = white(8192, seed)
            c = coherence(x, np.roll(x, 1))
            assert c.grid_mean() > 0.99

    def test_independent_pair_bias_near_1_over_k(self):
        # finite-sample floor: independent series show mean coherence ~ 1/K
        cfg = SpectralConfig()
        k = 8
        n = (k - 1) * cfg.stride + cfg.segment_length
        assert cfg.n_segments(n) == k
        for seed in range(10):
            c = coherence(white(n, 100 + seed), white(n, 200 + seed))
            assert 0.5 / k < c.grid_mean() < 1.5 / k

    def test_rescaling_invariance(self):
        x, y = white(4096, 13), white(4096, 14)
        base = coherence(x, y).values
        scaled = coherence(3.7 * x, 0.001 * y).values
        assert np.allclose(scaled, base, rtol=0, atol=1e-12)

    def test_single_segment_rejected(self):
        x = white(512, 15)
        with pytest.raises(InsufficientDataError):
            coherence(x, x.copy(), SpectralConfig(segment_length=512))

    def test_constant_input_degenerates(self):
        x = np.ones(2048)
        y = white(2048, 16)
        with pytest.raises(NumericalDegeneracyError) as err:
            coherence(x, y)
        assert "omega" in str(err.value)

    def test_assembly_matches_direct_call(self):
        x, y = white(4096, 17), white(4096, 18)
        cfg = SpectralConfig()
        direct = coherence(x, y, cfg)
        assembled = coherence_from_spectra(
            welch_psd(x, cfg), welch_psd(y, cfg), welch_csd(x, y, cfg)
        )
        assert np.array_equal(direct.values, assembled.values)

    def test_grid_mean_of_constant_spectrum(self):
        w = SpectralConfig(segment_length=64).frequencies()
        c = CoherenceSpectrum(w, np.full(len(w), 0.25))
        assert c.grid_mean() == pytest.approx(0.25)


class TestAgainstScipy:
    """Cross-check the estimators against an independent implementation."""

    scipy_signal = pytest.importorskip("scipy.signal")

    def to_two_sided(self, onesided):
        # scipy's one-sided density doubles interior bins; ours is two-sided
        out = onesided.copy()
        out[1:-1] = out[1:-1] / 2.0
        return out

    def test_psd_matches(self):
        x = white(8192, 30)
        cfg = SpectralConfig()
        ours = welch_psd(x, cfg)
        _, ref = self.scipy_signal.welch(
            x, fs=1.0, window="hann", nperseg=512, noverlap=256,
            detrend="constant", scaling="density",
        )
        assert np.allclose(ours.values, self.to_two_sided(ref), rtol=1e-8, atol=1e-12)

    def test_csd_matches(self):
        x, y = white(8192, 31), np.roll(white(8192, 31), 2)
        cfg = SpectralConfig()
        ours = welch_csd(x, y, cfg)
        _, ref = self.scipy_signal.csd(
            x, y, fs=1.0, window="hann", nperseg=512, noverlap=256,
            detrend="constant", scaling="density",
        )
        assert np.allclose(ours.values, self.to_two_sided(ref), rtol=1e-8, atol=1e-12)

    def test_coherence_matches(self):
        x = white(8192, 32)
        y = 0.6 * x + 0.8 * white(8192, 33)
        ours = coherence(x, y)
        _, ref = self.scipy_signal.coherence(
            x, y, fs=1.0, window="hann", nperseg=512, noverlap=256, detrend="constant"
        )
        assert np.allclose(ours.values, ref, rtol=1e-8, atol=1e-10)
