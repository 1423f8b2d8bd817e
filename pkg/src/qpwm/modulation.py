"""Pulse-width laws driven by photon counts and waveform synthesis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qpwm.photon_source import (
    DetectorModel,
    detector_voltage,
    make_rng,
    poisson_pmf,
    sample_photon_count,
)

# relative slack when deciding whether a raw width actually left [0, T]
_CLIP_RTOL = 1e-12


class ClippingWarning(UserWarning):
    """Raw widths exceed the period often enough to bias the analytic model."""


@dataclass(frozen=True)
class ModulationSpec:
    """Parameters of a randomized PWM train.

    ``v_ref`` defaults to ``duty_d * sawtooth_amp``, the comparator reference
    that produces the deterministic duty cycle.
    """

    period_t: float = 1e-3
    duty_d: float = 1 / 3
    amplitude_a: float = 5.0
    depth_b: float = 1.0
    lambda_t: float = 2.0
    sawtooth_amp: float = 1.0
    v_ref: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.period_t > 0:
            raise ValueError("period_t must be > 0")
        if not 0 < self.duty_d < 1:
            raise ValueError("duty_d must lie in (0, 1)")
        if not self.amplitude_a > 0:
            raise ValueError("amplitude_a must be > 0")
        if not self.depth_b >= 0:
            raise ValueError("depth_b must be >= 0")
        if not self.lambda_t > 0:
            raise ValueError("lambda_t must be > 0")
        if not self.sawtooth_amp > 0:
            raise ValueError("sawtooth_amp must be > 0")
        expected = self.duty_d * self.sawtooth_amp
        if self.v_ref is None:
            object.__setattr__(self, "v_ref", expected)
        elif not math.isclose(self.v_ref, expected, rel_tol=1e-12):
            raise ValueError(f"v_ref={self.v_ref} must equal duty_d*sawtooth_amp={expected}")

    @property
    def f0(self) -> float:
        return 1.0 / self.period_t

    @property
    def mean_width(self) -> float:
        return self.period_t * self.duty_d


@dataclass
class WidthSequence:
    widths: np.ndarray
    seed: int
    period_t: float
    clipped_count: int = 0
    spec: ModulationSpec | None = None
    onoff: bool = False

    def __post_init__(self):
        self.widths = np.asarray(self.widths, dtype=float)
        if np.any(self.widths < 0) or np.any(self.widths > self.period_t):
            raise ValueError("every width must lie in [0, period_t]")

    def __len__(self):
        return self.widths.size


@dataclass
class SampledWaveform:
    sample_rate_fs: float
    samples: np.ndarray
    period_t: float

    @property
    def samples_per_period(self) -> int:
        return int(round(self.sample_rate_fs * self.period_t))

    def mean_square(self) -> float:
        return float(np.mean(self.samples**2))


def _raw_width(n_eff, spec: ModulationSpec):
    td = spec.period_t * spec.duty_d
    return td * (1.0 - spec.depth_b) + spec.depth_b * np.asarray(n_eff, float) * td / spec.lambda_t


def _clip(raw, period_t):
    raw = np.asarray(raw, float)
    w = np.clip(raw, 0.0, period_t)
    slack = _CLIP_RTOL * period_t
    clipped = (raw > period_t + slack) | (raw < -slack)
    return w, clipped


def pulse_width_from_count(n, spec: ModulationSpec):
    """Width in seconds for photon count ``n``, clamped to ``[0, T]``."""
    if np.any(np.asarray(n) < 0):
        raise ValueError("photon count must be non-negative")
    w, _ = _clip(_raw_width(n, spec), spec.period_t)
    return float(w) if w.ndim == 0 else w


def clipping_probability(spec: ModulationSpec) -> float:
    """Probability that a noiseless raw width falls outside ``[0, T]``.

    The upper clip is the Poisson tail above the count threshold; below-zero
    widths are only reachable when ``depth_b > 1``.
    """
    b, d, lam = spec.depth_b, spec.duty_d, spec.lambda_t
    if b == 0:
        return 0.0
    # raw > T  <=>  n > lam * (1 - d*(1-b)) / (b*d)
    upper = lam * (1.0 - d * (1.0 - b)) / (b * d)
    n_hi = math.floor(upper * (1 + _CLIP_RTOL)) + 1
    p_below_hi = float(np.sum(poisson_pmf(np.arange(n_hi), lam))) if n_hi > 0 else 0.0
    p = max(0.0, 1.0 - p_below_hi)
    if b > 1:
        # raw < 0  <=>  n < lam * (b-1) / b
        lower = lam * (b - 1.0) / b
        n_lo = math.ceil(lower * (1 - _CLIP_RTOL))
        if n_lo > 0:
            p += float(np.sum(poisson_pmf(np.arange(n_lo), lam)))
    return min(p, 1.0)


def generate_width_sequence(
    spec: ModulationSpec,
    num_periods: int,
    seed: int,
    det: DetectorModel | None = None,
    stream: int = 0,
) -> WidthSequence:
    """Draw one width per period from Poisson photon counts.

    Detector noise enters as an equivalent count ``n + eps/g`` before the
    width law and clamp, so the noiseless path is the plain clamped law.
    """
    if num_periods < 1:
        raise ValueError("num_periods must be >= 1")
    det = det or DetectorModel()
    rng = make_rng(seed, stream)
    counts = sample_photon_count(spec.lambda_t, rng, size=num_periods)
    n_eff = detector_voltage(counts, det, rng) / det.gain_g
    widths, clipped = _clip(_raw_width(n_eff, spec), spec.period_t)
    return WidthSequence(
        widths=widths,
        seed=seed,
        period_t=spec.period_t,
        clipped_count=int(clipped.sum()),
        spec=spec,
    )


def deterministic_width_sequence(spec: ModulationSpec, num_periods: int) -> WidthSequence:
    """The unmodulated reference train: every width equals ``T*D``."""
    if num_periods < 1:
        raise ValueError("num_periods must be >= 1")
    return WidthSequence(
        widths=np.full(num_periods, spec.mean_width),
        seed=0,
        period_t=spec.period_t,
        spec=spec,
    )


def onoff_rate_for_duty(duty_d: float) -> float:
    """Mean photon count giving average duty ``duty_d`` under on-off modulation."""
    if not 0 < duty_d < 1:
        raise ValueError(f"duty_d must lie in (0, 1), got {duty_d}")
    return -math.log1p(-duty_d)


def generate_onoff_sequence(
    duty_d: float, period_t: float, num_periods: int, seed: int, stream: int = 0
) -> WidthSequence:
    """Full-period pulse when at least one photon is seen, empty period otherwise."""
    if num_periods < 1:
        raise ValueError("num_periods must be >= 1")
    if not period_t > 0:
        raise ValueError("period_t must be > 0")
    lam = onoff_rate_for_duty(duty_d)
    rng = make_rng(seed, stream)
    counts = sample_photon_count(lam, rng, size=num_periods)
    widths = np.where(counts > 0, period_t, 0.0)
    return WidthSequence(widths=widths, seed=seed, period_t=period_t, onoff=True)


def synthesize_waveform(
    widths: WidthSequence, sample_rate_fs: float, amplitude_a: float | None = None
) -> SampledWaveform:
    """Sample a left-aligned pulse train.

    Sample ``m`` of period ``i`` is high iff ``m/fs < w_i``. The amplitude is
    taken from the sequence's spec unless given explicitly.
    """
    if amplitude_a is None:
        if widths.spec is None:
            raise ValueError("amplitude_a is required for sequences without a spec")
        amplitude_a = widths.spec.amplitude_a
    spp_float = sample_rate_fs * widths.period_t
    spp = int(round(spp_float))
    if spp < 1 or abs(spp_float - spp) > 1e-9 * max(1.0, spp_float):
        raise ValueError(
            f"sample_rate_fs * period_t = {spp_float} is not a positive integer"
        )
    t_in_period = np.arange(spp) / sample_rate_fs
    high = t_in_period[None, :] < widths.widths[:, None]
    samples = np.where(high, float(amplitude_a), 0.0).ravel()
    return SampledWaveform(sample_rate_fs=sample_rate_fs, samples=samples, period_t=widths.period_t)
