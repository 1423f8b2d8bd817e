"""Poisson photon statistics and the photodetector voltage model.

A coherent source driven at constant current emits photons whose count in a
fixed detection window is Poisson distributed. The detector turns a count
``n`` into a voltage ``g * n``, optionally with additive Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return an independent generator for ``(seed, stream)``.

    Parallel callers must never share a generator; give each worker its own
    ``stream`` index instead.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def _check_lambda(lambda_t: float) -> None:
    if not lambda_t >= 0:
        raise ValueError(f"lambda_t must be non-negative, got {lambda_t}")


@dataclass(frozen=True)
class PhotonSourceSpec:
    """Photon rate and detection window.

    ``lambda_t`` is derived as ``rate_lambda * t_det`` when omitted.
    """

    rate_lambda: float
    t_det: float
    lambda_t: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.rate_lambda < 0:
            raise ValueError("rate_lambda must be >= 0")
        if self.t_det <= 0:
            raise ValueError("t_det must be > 0")
        expected = self.rate_lambda * self.t_det
        if self.lambda_t is None:
            object.__setattr__(self, "lambda_t", expected)
        elif not math.isclose(self.lambda_t, expected, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(
                f"lambda_t={self.lambda_t} inconsistent with rate_lambda*t_det={expected}"
            )


@dataclass(frozen=True)
class DetectorModel:
    gain_g: float = 1.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.gain_g <= 0:
            raise ValueError("gain_g must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def poisson_pmf(n, lambda_t: float):
    """Probability of detecting ``n`` photons when the mean count is ``lambda_t``.

    Evaluated in the log domain so that large ``n`` does not overflow the
    factorial. Accepts a scalar or an array of counts.
    """
    _check_lambda(lambda_t)
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise ValueError("photon count must be non-negative")
    if lambda_t == 0:
        out = (n_arr == 0).astype(float)
    else:
        logp = n_arr * math.log(lambda_t) - lambda_t - gammaln(n_arr + 1.0)
        out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def sample_photon_count(lambda_t: float, rng: np.random.Generator, size=None):
    """Draw Poisson photon counts from ``rng``.

    Returns a Python int when ``size`` is None, otherwise an int64 array.
    """
    _check_lambda(lambda_t)
    draws = rng.poisson(lambda_t, size=size)
    return int(draws) if size is None else draws.astype(np.int64)


def poisson_char_fn(a, lambda_t: float):
    """Characteristic function ``E[exp(j*n*a)]`` of a Poisson count."""
    _check_lambda(lambda_t)
    a = np.asarray(a, dtype=float)
    out = np.exp(lambda_t * (np.cos(a) - 1.0)) * np.exp(1j * lambda_t * np.sin(a))
    return complex(out) if out.ndim == 0 else out


def detector_voltage(n, det: DetectorModel, rng: np.random.Generator | None = None):
    """Detector output ``g*n`` plus Gaussian noise of std ``det.noise_sigma``.

    ``rng`` is only consumed when the detector is noisy; a noiseless detector
    returns exactly ``g*n``.
    """
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise ValueError("photon count must be non-negative")
    v = det.gain_g * n_arr.astype(float)
    if det.noise_sigma > 0:
        if rng is None:
            raise ValueError("a random generator is required for a noisy detector")
        v = v + rng.normal(0.0, det.noise_sigma, size=v.shape)
    return float(v) if v.ndim == 0 else v
