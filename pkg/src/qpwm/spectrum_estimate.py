"""Averaged-periodogram PSD estimation and harmonic line extraction."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from qpwm.modulation import SampledWaveform
from qpwm.spectrum_analytic import HarmonicLine


class Window(str, Enum):
    HANN = "hann"
    RECTANGULAR = "rectangular"


@dataclass(frozen=True)
class WelchConfig:
    sample_rate_fs: float = 1e6
    num_segments: int = 16
    window: Window = Window.HANN
    overlap: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "window", Window(self.window))
        if self.num_segments < 1:
            raise ValueError("num_segments must be >= 1")
        if not 0 <= self.overlap < 1:
            raise ValueError("overlap must lie in [0, 1)")
        if not self.sample_rate_fs > 0:
            raise ValueError("sample_rate_fs must be > 0")


@dataclass
class PsdEstimate:
    """Unilateral PSD on the grid ``k * delta_f``, k = 0..L/2."""

    delta_f: float
    bins: np.ndarray
    n_segments_used: int
    segment_length: int

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.bins.size) * self.delta_f

    def total_power(self) -> float:
        return float(np.sum(self.bins) * self.delta_f)


def window_samples(kind: Window, length: int) -> np.ndarray:
    """Periodic Hann or rectangular window of ``length`` samples."""
    kind = Window(kind)
    if kind is Window.RECTANGULAR:
        return np.ones(length)
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2 * np.pi * n / length)


def _segment_layout(n_samples: int, config: WelchConfig) -> tuple[int, int]:
    k = config.num_segments
    # K segments of length L overlapping by a fraction o span L * (1 + (K-1)(1-o))
    length = int(n_samples / (1 + (k - 1) * (1 - config.overlap)))
    if length % 2:
        warnings.warn(f"odd segment length {length} truncated to {length - 1}", stacklevel=3)
        length -= 1
    if length < 2:
        raise ValueError(f"{n_samples} samples are too few for {k} segments")
    step = max(1, length - int(round(config.overlap * length)))
    return length, step


def welch_psd(waveform: SampledWaveform | np.ndarray, config: WelchConfig) -> PsdEstimate:
    """Average windowed periodograms of equal, non-detrended segments.

    Each periodogram is scaled by ``1 / (fs * sum(w**2))`` and every bin other
    than DC and Nyquist is doubled, so ``sum(bins) * delta_f`` is the
    window-weighted mean square of the signal.
    """
    x = np.asarray(getattr(waveform, "samples", waveform), dtype=float)
    fs = config.sample_rate_fs
    if isinstance(waveform, SampledWaveform) and not math.isclose(waveform.sample_rate_fs, fs):
        raise ValueError(
            f"waveform sampled at {waveform.sample_rate_fs} Hz but config expects {fs} Hz"
        )
    if x.size < config.num_segments:
        raise ValueError("waveform is shorter than the number of segments")
    length, step = _segment_layout(x.size, config)
    win = window_samples(config.window, length)
    scale = 1.0 / (fs * np.sum(win**2))

    acc = np.zeros(length // 2 + 1)
    for i in range(config.num_segments):
        seg = x[i * step : i * step + length]
        acc += np.abs(np.fft.rfft(seg * win)) ** 2
    psd = acc * scale / config.num_segments
    psd[1:-1] *= 2.0
    return PsdEstimate(
        delta_f=fs / length,
        bins=psd,
        n_segments_used=config.num_segments,
        segment_length=length,
    )


def harmonic_bins(psd: PsdEstimate, freq: float, band_bins: int) -> slice:
    """Bins whose centre lies within ``band_bins`` bin widths of ``freq``."""
    pos = freq / psd.delta_f
    lo = max(0, math.ceil(pos - band_bins - 1e-9))
    hi = min(psd.bins.size - 1, math.floor(pos + band_bins + 1e-9))
    return slice(lo, hi + 1)


def extract_harmonic_lines(
    psd: PsdEstimate,
    analytic_cont,
    f0: float,
    k_max: int,
    band_bins: int = 3,
) -> list[HarmonicLine]:
    """Integrate the PSD excess over the continuous model around each ``k*f0``.

    ``analytic_cont`` holds the continuous density sampled on the PSD grid
    (``None`` for a pure line spectrum). Negative residuals are floored at zero.
    """
    if band_bins < 1:
        raise ValueError("band_bins must be >= 1")
    nyquist = (psd.bins.size - 1) * psd.delta_f
    if k_max * f0 > nyquist:
        raise ValueError(f"harmonic {k_max} at {k_max * f0} Hz lies beyond Nyquist ({nyquist} Hz)")
    cont = np.zeros_like(psd.bins) if analytic_cont is None else np.asarray(analytic_cont, float)
    if cont.shape != psd.bins.shape:
        raise ValueError("analytic_cont must be sampled on the PSD grid")
    residual = np.maximum(psd.bins - cont, 0.0)
    lines = []
    for k in range(1, k_max + 1):
        sl = harmonic_bins(psd, k * f0, band_bins)
        lines.append(HarmonicLine(k, k * f0, float(np.sum(residual[sl]) * psd.delta_f)))
    return lines


def cont_on_grid(psd: PsdEstimate, density) -> np.ndarray:
    """Evaluate a continuous density ``density(f)`` on the PSD grid, zero at DC."""
    f = psd.freqs
    out = np.zeros_like(f)
    out[1:] = density(f[1:])
    return out


def attenuation_db(unmod_power: float, mod_power: float) -> float:
    if unmod_power <= 0 or mod_power <= 0:
        raise ValueError("powers must be positive to express attenuation in dB")
    return 10.0 * math.log10(unmod_power / mod_power)


def peak_power_reduction_db(
    unmod_psd: PsdEstimate, mod_psd: PsdEstimate, exclude_dc_bins: int = 5
) -> float:
    """Ratio in dB of the largest non-DC bins of two estimates on the same grid."""
    if unmod_psd.bins.shape != mod_psd.bins.shape or not math.isclose(
        unmod_psd.delta_f, mod_psd.delta_f
    ):
        raise ValueError("estimates must share the same frequency grid")
    if exclude_dc_bins >= unmod_psd.bins.size:
        raise ValueError("exclude_dc_bins leaves no bins to compare")
    return attenuation_db(
        float(unmod_psd.bins[exclude_dc_bins:].max()), float(mod_psd.bins[exclude_dc_bins:].max())
    )
