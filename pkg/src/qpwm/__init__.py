"""Photon-count randomized PWM: simulation, closed-form spectra and Welch estimation."""

from qpwm.modulation import (
    ClippingWarning,
    ModulationSpec,
    SampledWaveform,
    WidthSequence,
    clipping_probability,
    deterministic_width_sequence,
    generate_onoff_sequence,
    generate_width_sequence,
    onoff_rate_for_duty,
    pulse_width_from_count,
    synthesize_waveform,
)
from qpwm.photon_source import (
    DetectorModel,
    PhotonSourceSpec,
    detector_voltage,
    make_rng,
    poisson_char_fn,
    poisson_pmf,
    sample_photon_count,
)
from qpwm.spectrum_analytic import (
    AnalyticSpectrum,
    HarmonicLine,
    analytic_spectrum,
    average_power,
    c_factor,
    dc_power,
    e_factor,
    fourier_coefficient,
    fourier_partial_power,
    onoff_s_cont,
    onoff_spectrum,
    power_balance,
    s_cont,
    s_disc_line,
    unmodulated_harmonic_power,
    unmodulated_spectrum,
)
from qpwm.spectrum_estimate import (
    PsdEstimate,
    WelchConfig,
    Window,
    attenuation_db,
    extract_harmonic_lines,
    peak_power_reduction_db,
    welch_psd,
)

__version__ = "0.1.0"
