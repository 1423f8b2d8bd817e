import numpy as np
import pytest

from qpwm import ModulationSpec

TABLE1 = dict(period_t=1e-3, duty_d=1 / 3, amplitude_a=5.0, depth_b=1.0, lambda_t=2.0)
TABLE2 = dict(period_t=1e-3, duty_d=0.25, amplitude_a=5.0, depth_b=0.5, lambda_t=0.3)


@pytest.fixture
def table1_spec():
    return ModulationSpec(**TABLE1)


@pytest.fixture
def table2_spec():
    return ModulationSpec(**TABLE2)


def brute_force_moments(f, spec, n_max=400):
    """E[U(f)] and E[|U(f)|^2] by summing the Poisson PMF over counts.

    Uses the unclipped width law and an independent PMF (scipy) so that it
    shares nothing with the closed forms under test.
    """
    from scipy.stats import poisson

    n = np.arange(n_max)
    pmf = poisson.pmf(n, spec.lambda_t)
    td = spec.period_t * spec.duty_d
    w = td * (1 - spec.depth_b) + spec.depth_b * n / spec.lambda_t * td
    f = np.atleast_1d(np.asarray(f, float))[:, None]
    u = spec.amplitude_a * (np.exp(-2j * np.pi * f * w) - 1) / (-2j * np.pi * f)
    mean_u = (pmf * u).sum(axis=1)
    mean_u2 = (pmf * np.abs(u) ** 2).sum(axis=1)
    return mean_u, mean_u2
