"""Closed-form power spectra of deterministic and photon-randomized PWM trains.

All spectra are unilateral and expressed in V^2 (lines) or V^2/Hz (densities)
into a 1 ohm load. The DC line is reported separately from the harmonics as
``(A * E[w] / T)**2``; it is never doubled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from qpwm.modulation import (
    ClippingWarning,
    ModulationSpec,
    clipping_probability,
    onoff_rate_for_duty,
)

CLIP_WARN_THRESHOLD = 1e-3


@dataclass(frozen=True)
class HarmonicLine:
    k: int
    freq: float
    power: float


@dataclass
class AnalyticSpectrum:
    """Continuous density on a frequency grid plus discrete lines.

    ``lines[0]`` is the DC line; ``lines[k]`` is harmonic ``k``.
    """

    freqs: np.ndarray
    cont: np.ndarray
    lines: list[HarmonicLine]
    period_t: float
    mean_power: float
    spec: ModulationSpec | None = None
    clipping_probability: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def dc(self) -> float:
        return self.lines[0].power

    def line_powers(self, k_max: int | None = None) -> np.ndarray:
        """Harmonic powers for k = 1..k_max (DC excluded)."""
        powers = np.array([ln.power for ln in self.lines[1:]])
        return powers if k_max is None else powers[:k_max]


def _positive_freq(f):
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0; DC is handled by dc_power")
    return f


def _ret(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def fourier_coefficient(k, spec):
    """Complex Fourier coefficient ``c_k`` of the periodic rectangular pulse."""
    k = np.asarray(k, dtype=float)
    a, d = spec.amplitude_a, spec.duty_d
    return _ret(np.exp(-1j * np.pi * k * d) * a * d * np.sinc(k * d))


def unmodulated_harmonic_power(k, spec):
    """Power ``2|c_k|^2`` of harmonic ``k >= 1`` of the deterministic train."""
    k_arr = np.asarray(k)
    if np.any(k_arr < 1):
        raise ValueError("harmonic index must be >= 1; use dc_power for k = 0")
    a, d = spec.amplitude_a, spec.duty_d
    return _ret(2.0 * (a * d * np.sinc(k_arr * d)) ** 2)


def average_power(spec) -> float:
    """Mean square of the deterministic train, ``A^2 * D``."""
    return spec.amplitude_a**2 * spec.duty_d


def fourier_partial_power(spec, k_terms: int) -> float:
    """Parseval sum ``|c_0|^2 + sum_{k=1}^{K} 2|c_k|^2``."""
    k = np.arange(1, k_terms + 1)
    return float(abs(fourier_coefficient(0, spec)) ** 2 + np.sum(unmodulated_harmonic_power(k, spec)))


# The helpers below take the normalized frequency nu = f*T (harmonic number),
# so harmonic k is evaluated at exactly nu = k.


def _half_step(nu, spec: ModulationSpec):
    # half of 2*pi*f*b*T*D/lambda_T
    return np.pi * (nu * spec.duty_d) * spec.depth_b / spec.lambda_t


def _log_e(nu, spec: ModulationSpec):
    # cos(u) - 1 = -2 sin^2(u/2), exact for the tiny phases of large lambda_T
    return -2.0 * spec.lambda_t * np.sin(_half_step(nu, spec)) ** 2


def _half_c_phase(nu, spec: ModulationSpec):
    return np.pi * (nu * spec.duty_d) * (1.0 - spec.depth_b) + 0.5 * spec.lambda_t * np.sin(
        2.0 * _half_step(nu, spec)
    )


def e_factor(x, spec: ModulationSpec):
    """Magnitude factor of the width characteristic function at frequency ``x``.

    Equals ``exp(lambda_T * (cos(2*pi*x*b*T*D/lambda_T) - 1))``; lies in (0, 1].
    """
    nu = np.asarray(x, dtype=float) * spec.period_t
    return _ret(np.exp(_log_e(nu, spec)))


def c_factor(x, spec: ModulationSpec):
    """Phase factor ``cos(2*pi*x*T*D*(1-b) + lambda_T*sin(2*pi*x*b*T*D/lambda_T))``."""
    nu = np.asarray(x, dtype=float) * spec.period_t
    return _ret(np.cos(2.0 * _half_c_phase(nu, spec)))


def s_cont(f, spec: ModulationSpec):
    """Continuous PSD in V^2/Hz of the modulated train, for ``f > 0``."""
    f = _positive_freq(f)
    # -expm1(2 log E) keeps 1 - E^2 accurate when E is close to 1
    one_minus_e2 = -np.expm1(2.0 * _log_e(f * spec.period_t, spec))
    scale = spec.amplitude_a**2 / (2.0 * spec.period_t * np.pi**2 * f**2)
    return _ret(scale * one_minus_e2)


def s_disc_line(k, spec: ModulationSpec):
    """Power in V^2 of discrete harmonic ``k >= 1`` of the modulated train."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 1):
        raise ValueError("harmonic index must be >= 1; use dc_power for k = 0")
    log_e = _log_e(k_arr, spec)
    one_minus_e = -np.expm1(log_e)
    one_minus_c = 2.0 * np.sin(_half_c_phase(k_arr, spec)) ** 2
    # E^2 - 2EC + 1 rearranged as a sum of non-negative terms without cancellation
    bracket = one_minus_e**2 + 2.0 * np.exp(log_e) * one_minus_c
    return _ret(spec.amplitude_a**2 / (2.0 * np.pi**2 * k_arr**2) * bracket)


def dc_power(spec=None, *, amplitude_a: float | None = None, mean_duty: float | None = None) -> float:
    """DC line ``(A * E[w] / T)^2``.

    For the mean-preserving width law ``E[w] = T*D``. Pass ``amplitude_a`` and
    ``mean_duty`` directly for other laws such as on-off.
    """
    if spec is not None:
        amplitude_a = spec.amplitude_a if amplitude_a is None else amplitude_a
        mean_duty = spec.duty_d if mean_duty is None else mean_duty
    if amplitude_a is None or mean_duty is None:
        raise ValueError("dc_power needs a spec or amplitude_a and mean_duty")
    return (amplitude_a * mean_duty) ** 2


def onoff_s_cont(f, duty_d: float, period_t: float, amplitude_a: float):
    """Continuous PSD of the on-off train with ``lambda_T = -ln(1 - D)``.

    The on-off train has no harmonic lines above DC.
    """
    f = _positive_freq(f)
    lam = onoff_rate_for_duty(duty_d)
    p0 = math.exp(-lam)
    # sin^2 form avoids cancellation in 1 - cos(2 pi f T) and is exact at f = k/T
    one_minus_cos = 2.0 * np.sin(np.pi * f * period_t) ** 2
    return _ret(amplitude_a**2 * p0 * (1.0 - p0) * one_minus_cos / (period_t * np.pi**2 * f**2))


def default_grid(f_min: float = 1.0, f_max: float = 10_000.0, step: float = 1.0) -> np.ndarray:
    return np.arange(f_min, f_max + 0.5 * step, step)


def _check_grid(f_grid):
    f_grid = np.asarray(f_grid, dtype=float)
    if f_grid.ndim != 1 or f_grid.size == 0:
        raise ValueError("f_grid must be a non-empty 1-D array")
    if f_grid[0] <= 0 or np.any(np.diff(f_grid) <= 0):
        raise ValueError("f_grid must be strictly positive and increasing")
    return f_grid


def analytic_spectrum(spec: ModulationSpec, f_grid=None, k_max: int = 8) -> AnalyticSpectrum:
    """Assemble continuous density samples, DC and harmonic lines 1..k_max.

    Emits a :class:`ClippingWarning` when the width clamp is hit with
    probability above ``CLIP_WARN_THRESHOLD``; the formulas ignore clipping.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    f_grid = _check_grid(default_grid() if f_grid is None else f_grid)
    ks = np.arange(1, k_max + 1)
    powers = np.asarray(s_disc_line(ks, spec))
    lines = [HarmonicLine(0, 0.0, dc_power(spec))]
    lines += [HarmonicLine(int(k), k / spec.period_t, float(p)) for k, p in zip(ks, powers)]
    p_clip = clipping_probability(spec)
    notes = []
    if p_clip > CLIP_WARN_THRESHOLD:
        msg = (
            f"width clipping probability {p_clip:.3g} exceeds {CLIP_WARN_THRESHOLD:g}; "
            "analytic spectrum is approximate"
        )
        notes.append(msg)
        warnings.warn(msg, ClippingWarning, stacklevel=2)
    return AnalyticSpectrum(
        freqs=f_grid,
        cont=np.asarray(s_cont(f_grid, spec), dtype=float),
        lines=lines,
        period_t=spec.period_t,
        mean_power=spec.amplitude_a**2 * spec.duty_d,
        spec=spec,
        clipping_probability=p_clip,
        warnings=notes,
    )


def unmodulated_spectrum(spec, k_max: int = 8, f_grid=None) -> AnalyticSpectrum:
    """Deterministic PWM lines with an identically zero continuous part."""
    f_grid = _check_grid(default_grid() if f_grid is None else f_grid)
    ks = np.arange(1, k_max + 1)
    powers = np.asarray(unmodulated_harmonic_power(ks, spec))
    lines = [HarmonicLine(0, 0.0, abs(fourier_coefficient(0, spec)) ** 2)]
    lines += [HarmonicLine(int(k), k / spec.period_t, float(p)) for k, p in zip(ks, powers)]
    return AnalyticSpectrum(
        freqs=f_grid,
        cont=np.zeros_like(f_grid),
        lines=lines,
        period_t=spec.period_t,
        mean_power=average_power(spec),
        spec=spec if isinstance(spec, ModulationSpec) else None,
    )


def onoff_spectrum(
    duty_d: float, period_t: float, amplitude_a: float, f_grid=None, k_max: int = 8
) -> AnalyticSpectrum:
    f_grid = _check_grid(default_grid() if f_grid is None else f_grid)
    lines = [HarmonicLine(0, 0.0, dc_power(amplitude_a=amplitude_a, mean_duty=duty_d))]
    lines += [HarmonicLine(k, k / period_t, 0.0) for k in range(1, k_max + 1)]
    return AnalyticSpectrum(
        freqs=f_grid,
        cont=np.asarray(onoff_s_cont(f_grid, duty_d, period_t, amplitude_a), dtype=float),
        lines=lines,
        period_t=period_t,
        mean_power=amplitude_a**2 * duty_d,
    )


@dataclass(frozen=True)
class PowerBalance:
    cont: float
    lines: float
    dc: float
    expected: float

    @property
    def total(self) -> float:
        return self.cont + self.lines + self.dc

    @property
    def fraction(self) -> float:
        return self.total / self.expected


def power_balance(spectrum: AnalyticSpectrum, f_max: float, k_max: int) -> PowerBalance:
    """Integrate the density over (0, f_max] and add DC and lines 1..k_max.

    The density is integrated with the trapezoid rule on the spectrum's own
    grid; the sliver between 0 and the first grid point uses the first sample.
    """
    if k_max >= len(spectrum.lines):
        raise ValueError(f"spectrum carries only {len(spectrum.lines) - 1} harmonic lines")
    f0 = 1.0 / spectrum.period_t
    if f_max < k_max * f0 * (1 - 1e-12):
        raise ValueError("f_max must cover k_max harmonics")
    sel = spectrum.freqs <= f_max * (1 + 1e-12)
    f, s = spectrum.freqs[sel], spectrum.cont[sel]
    cont = float(trapezoid(s, f) + f[0] * s[0]) if f.size else 0.0
    lines = float(sum(ln.power for ln in spectrum.lines[1 : k_max + 1]))
    return PowerBalance(cont=cont, lines=lines, dc=spectrum.dc, expected=spectrum.mean_power)
