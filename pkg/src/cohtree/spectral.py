"""Welch-averaged spectral density and coherence estimation.

Conventions, fixed package-wide:

* frequencies are ``omega_k = 2*pi*k/nfft`` in radians/sample on ``[0, pi]``;
  the spectrum of a real series is symmetric, so only this half is estimated
  and integrals use the symmetric extension;
* densities are two-sided, normalized so the mean over the symmetrically
  extended grid equals the series variance: a unit-variance white input gives
  values close to 1 everywhere;
* each segment has its own mean removed before windowing, which suppresses
  residual within-session drift;
* cross spectra follow ``mean(conj(X) * Y)``, so a copy of ``x`` delayed by
  ``d`` samples shows phase slope ``-d * omega``.

Averaging at least two windowed segments is what makes estimated coherence
informative: a single segment gives coherence identically 1 for any pair, so
the single-segment case is rejected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientDataError,
    NumericalDegeneracyError,
    ValidationError,
)

_WINDOWS = {
    "rectangular": lambda n: np.ones(n),
    "hann": lambda n: 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n),
    "hamming": lambda n: 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / n),
    "blackman": lambda n: (
        0.42
        - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
        + 0.08 * np.cos(4.0 * np.pi * np.arange(n) / n)
    ),
}


@dataclass(frozen=True)
class SpectralConfig:
    """Estimator parameters: segment length (power of two), overlap fraction
    in [0, 1), taper name, and optional zero-padded grid size."""

    segment_length: int = 512
    overlap_fraction: float = 0.5
    window: str = "hann"
    grid_size: int | None = None

    def __post_init__(self):
        L = self.segment_length
        if L < 16 or (L & (L - 1)) != 0:
            raise ValidationError(f"segment_length must be a power of two >= 16, got {L}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValidationError(f"overlap_fraction must be in [0, 1), got {self.overlap_fraction}")
        if self.window not in _WINDOWS:
            raise ValidationError(f"unknown window {self.window!r}; choose from {sorted(_WINDOWS)}")
        if self.grid_size is not None and self.grid_size < L // 2 + 1:
            raise ValidationError("grid_size cannot be below segment_length/2 + 1")

    @property
    def nfft(self) -> int:
        if self.grid_size is None:
            return self.segment_length
        return 2 * (self.grid_size - 1)

    @property
    def stride(self) -> int:
        return self.segment_length - int(self.overlap_fraction * self.segment_length)

    def n_segments(self, n: int) -> int:
        """Number of averaged segments for a series of length ``n``."""
        if n < self.segment_length:
            return 0
        return (n - self.segment_length) // self.stride + 1

    def frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.nfft // 2 + 1) / self.nfft


@dataclass(frozen=True)
class SpectrumEstimate:
    """Auto-spectral density on the [0, pi] grid; values are nonnegative."""

    frequencies: np.ndarray
    values: np.ndarray

    def grid_mean(self) -> float:
        """Mean over the symmetrically extended full grid; approximates the
        series variance (Parseval)."""
        v = self.values
        nfft = 2 * (len(v) - 1)
        return float((v[0] + v[-1] + 2.0 * v[1:-1].sum()) / nfft)


@dataclass(frozen=True)
class CrossSpectrumEstimate:
    """Complex cross-spectral density on the [0, pi] grid."""

    frequencies: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class CoherenceSpectrum:
    """Magnitude-squared coherence on the [0, pi] grid, clamped to [0, 1]."""

    frequencies: np.ndarray
    values: np.ndarray

    def grid_mean(self) -> float:
        return float(self.values.mean())


def _segment_ffts(x: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """Windowed, mean-removed rFFTs of all overlapping segments, as rows."""
    L, stride = cfg.segment_length, cfg.stride
    k = cfg.n_segments(len(x))
    if k == 0:
        raise InsufficientDataError(
            f"series length {len(x)} is below one segment of {L} samples"
        )
    w = _WINDOWS[cfg.window](L)
    idx = stride * np.arange(k)[:, None] + np.arange(L)[None, :]
    segs = x[idx]
    segs = segs - segs.mean(axis=1, keepdims=True)
    return np.fft.rfft(segs * w, n=cfg.nfft, axis=1)


def welch_csd(x, y, cfg: SpectralConfig = SpectralConfig()) -> CrossSpectrumEstimate:
    """Segment-averaged cross-spectral density ``mean(conj(X) * Y)``.

    ``welch_csd(x, x)`` is the auto-spectral estimate on the same code path,
    and swapping the arguments conjugates the result (Hermitian symmetry).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"inputs must be equal-length 1-d series, got {x.shape} and {y.shape}")
    w = _WINDOWS[cfg.window](cfg.segment_length)
    fx = _segment_ffts(x, cfg)
    fy = fx if y is x else _segment_ffts(y, cfg)
    cross = (np.conj(fx) * fy).mean(axis=0) / float(np.sum(w * w))
    return CrossSpectrumEstimate(cfg.frequencies(), cross)


def welch_psd(x, cfg: SpectralConfig = SpectralConfig()) -> SpectrumEstimate:
    """Welch auto-spectral density; two-sided convention, grid mean over the
    symmetric extension approximates the variance of ``x``."""
    x = np.asarray(x, dtype=float)
    cross = welch_csd(x, x, cfg)
    values = cross.values.real
    assert np.all(values >= 0.0)
    return SpectrumEstimate(cross.frequencies, values)


def coherence_from_spectra(
    px: SpectrumEstimate, py: SpectrumEstimate, pxy: CrossSpectrumEstimate
) -> CoherenceSpectrum:
    """Assemble ``|csd|^2 / (psd_x * psd_y)`` from already-estimated spectra.

    Split out so callers that cache per-series auto-spectra across many pairs
    hit the exact arithmetic of :func:`coherence`. An auto-spectrum collapsing
    below 1e-300 at some grid point raises
    :class:`NumericalDegeneracyError` naming the frequency; rounding
    excursions above 1 are clamped.
    """
    denom = px.values * py.values
    tiny = denom < 1e-300
    if np.any(tiny):
        w_bad = float(px.frequencies[int(np.argmax(tiny))])
        raise NumericalDegeneracyError(
            f"auto-spectrum vanishes at omega={w_bad:.6f}; coherence undefined there"
        )
    c = np.abs(pxy.values) ** 2 / denom
    assert float(c.max()) <= 1.0 + 1e-9
    return CoherenceSpectrum(px.frequencies, np.clip(c, 0.0, 1.0))


def coherence(x, y, cfg: SpectralConfig = SpectralConfig()) -> CoherenceSpectrum:
    """Magnitude-squared coherence ``|csd|^2 / (psd_x * psd_y)``.

    Requires at least two averaged segments; a single segment would give the
    degenerate estimate C == 1 everywhere.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = cfg.n_segments(len(x))
    if k < 2:
        raise InsufficientDataError(
            f"coherence needs >= 2 averaged segments, got {k} "
            f"(length {len(x)}, segment {cfg.segment_length}, stride {cfg.stride})"
        )
    return coherence_from_spectra(welch_psd(x, cfg), welch_psd(y, cfg), welch_csd(x, y, cfg))
