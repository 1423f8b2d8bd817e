"""Command-line front end: synthesis, spectra, estimation and table/figure reproduction.

Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from qpwm import io
from qpwm.modulation import (
    ClippingWarning,
    ModulationSpec,
    WidthSequence,
    clipping_probability,
    deterministic_width_sequence,
    generate_onoff_sequence,
    generate_width_sequence,
    onoff_rate_for_duty,
    synthesize_waveform,
)
from qpwm.photon_source import DetectorModel
from qpwm.spectrum_analytic import (
    HarmonicLine,
    analytic_spectrum,
    default_grid,
    onoff_s_cont,
    onoff_spectrum,
    power_balance,
    s_cont,
    unmodulated_spectrum,
)
from qpwm.spectrum_estimate import (
    PsdEstimate,
    WelchConfig,
    Window,
    attenuation_db,
    cont_on_grid,
    extract_harmonic_lines,
    peak_power_reduction_db,
    welch_psd,
)

log = logging.getLogger("qpwm")


class ConfigError(ValueError):
    """Invalid experiment configuration; carries one message per offending field."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


# flat config keys -> defaults (Table I settings)
DEFAULTS: dict[str, object] = {
    "period": 1e-3,
    "duty": 1 / 3,
    "amplitude": 5.0,
    "lambda_t": 2.0,
    "depth_b": 1.0,
    "sawtooth_amp": 1.0,
    "gain": 1.0,
    "noise_sigma": 0.0,
    "periods": 1000,
    "fs": 1e6,
    "segments": 16,
    "window": "hann",
    "overlap": 0.0,
    "seed": 1,
    "seeds": 1,
    "kmax": 8,
    "band_bins": 3,
    "onoff": False,
    "f_min": 1.0,
    "f_max": 10_000.0,
    "f_step": 1.0,
}

_INT_KEYS = {"periods", "segments", "seed", "seeds", "kmax", "band_bins"}
_BOOL_KEYS = {"onoff"}
_STR_KEYS = {"window"}

PRESETS: dict[str, dict[str, object]] = {
    "table1": {"amplitude": 5.0, "period": 1e-3, "lambda_t": 2.0, "depth_b": 1.0, "duty": 1 / 3},
    "table2": {"amplitude": 5.0, "period": 1e-3, "lambda_t": 0.3, "depth_b": 0.5, "duty": 0.25},
    "onoff": {"amplitude": 2.0, "period": 1e-3, "duty": 0.5, "onoff": True},
}
TARGETS = {
    "table1": "table1",
    "table2": "table2",
    "fig3": "table1",
    "fig4": "table2",
    "fig5": "onoff",
}


@dataclass
class ExperimentConfig:
    spec: ModulationSpec
    detector: DetectorModel
    num_periods: int
    sample_rate_fs: float
    welch: WelchConfig
    seed: int
    k_max: int
    f_grid: tuple[float, float, float]
    onoff: bool = False
    seeds: int = 1
    band_bins: int = 3

    def grid(self) -> np.ndarray:
        return default_grid(*self.f_grid)


def _coerce(key: str, value, problems: list[str]):
    try:
        if key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if key in _STR_KEYS:
            return str(value)
        if key in _INT_KEYS:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if isinstance(value, bool):
            raise TypeError
        out = float(value)
        if not math.isfinite(out):
            raise TypeError
        return out
    except (TypeError, ValueError):
        problems.append(f"{key}: invalid value {value!r}")
        return None


def build_config(values: dict[str, object]) -> ExperimentConfig:
    """Validate a flat key/value mapping and assemble an :class:`ExperimentConfig`."""
    problems: list[str] = []
    unknown = sorted(set(values) - set(DEFAULTS))
    problems += [f"{k}: unknown key" for k in unknown]
    merged = dict(DEFAULTS)
    for key, value in values.items():
        if key in DEFAULTS and value is not None:
            coerced = _coerce(key, value, problems)
            if coerced is not None:
                merged[key] = coerced
    v = merged

    checks = [
        ("period", v["period"] > 0, "must be > 0"),
        ("duty", 0 < v["duty"] < 1, "must lie in (0, 1)"),
        ("amplitude", v["amplitude"] > 0, "must be > 0"),
        ("depth_b", v["depth_b"] >= 0, "must be >= 0"),
        ("lambda_t", v["onoff"] or v["lambda_t"] > 0, "must be > 0"),
        ("sawtooth_amp", v["sawtooth_amp"] > 0, "must be > 0"),
        ("gain", v["gain"] > 0, "must be > 0"),
        ("noise_sigma", v["noise_sigma"] >= 0, "must be >= 0"),
        ("periods", v["periods"] >= 1, "must be >= 1"),
        ("fs", v["fs"] > 0, "must be > 0"),
        ("segments", v["segments"] >= 1, "must be >= 1"),
        ("window", v["window"] in {w.value for w in Window}, "must be 'hann' or 'rectangular'"),
        ("overlap", 0 <= v["overlap"] < 1, "must lie in [0, 1)"),
        ("seed", v["seed"] >= 0, "must be >= 0"),
        ("seeds", v["seeds"] >= 1, "must be >= 1"),
        ("kmax", v["kmax"] >= 1, "must be >= 1"),
        ("band_bins", v["band_bins"] >= 1, "must be >= 1"),
        ("f_min", v["f_min"] > 0, "must be > 0"),
        ("f_max", v["f_max"] > v["f_min"], "must exceed f_min"),
        ("f_step", v["f_step"] > 0, "must be > 0"),
    ]
    problems += [f"{key}: {msg} (got {v[key]!r})" for key, ok, msg in checks if not ok]
    if not problems:
        spp = v["fs"] * v["period"]
        if abs(spp - round(spp)) > 1e-9 * max(1.0, spp) or round(spp) < 1:
            problems.append(f"fs: fs*period = {spp:g} must be a positive integer")
        if v["periods"] < v["segments"]:
            problems.append("periods: must be >= segments")
        if v["kmax"] / v["period"] > v["fs"] / 2:
            problems.append("kmax: highest harmonic lies beyond Nyquist")
    if problems:
        raise ConfigError(problems)

    lam = onoff_rate_for_duty(v["duty"]) if v["onoff"] else v["lambda_t"]
    spec = ModulationSpec(
        period_t=v["period"],
        duty_d=v["duty"],
        amplitude_a=v["amplitude"],
        depth_b=1.0 if v["onoff"] else v["depth_b"],
        lambda_t=lam,
        sawtooth_amp=v["sawtooth_amp"],
    )
    return ExperimentConfig(
        spec=spec,
        detector=DetectorModel(gain_g=v["gain"], noise_sigma=v["noise_sigma"]),
        num_periods=v["periods"],
        sample_rate_fs=v["fs"],
        welch=WelchConfig(
            sample_rate_fs=v["fs"],
            num_segments=v["segments"],
            window=v["window"],
            overlap=v["overlap"],
        ),
        seed=v["seed"],
        k_max=v["kmax"],
        f_grid=(v["f_min"], v["f_max"], v["f_step"]),
        onoff=v["onoff"],
        seeds=v["seeds"],
        band_bins=v["band_bins"],
    )


def parse_config(path) -> ExperimentConfig:
    """Read a flat JSON object of config keys; missing keys take Table I defaults."""
    path = Path(path)
    try:
        values = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError([f"config: file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON ({exc})"]) from None
    if not isinstance(values, dict):
        raise ConfigError(["config: top level must be a JSON object"])
    return build_config(values)


def config_meta(config: ExperimentConfig) -> dict[str, object]:
    s = config.spec
    meta: dict[str, object] = {
        "period": s.period_t,
        "duty": s.duty_d,
        "amplitude": s.amplitude_a,
        "depth_b": s.depth_b,
        "lambda_t": s.lambda_t,
        "onoff": str(config.onoff).lower(),
        "periods": config.num_periods,
        "fs": config.sample_rate_fs,
        "segments": config.welch.num_segments,
        "window": config.welch.window.value,
        "overlap": config.welch.overlap,
        "seed": config.seed,
        "seeds": config.seeds,
        "noise_sigma": config.detector.noise_sigma,
    }
    return meta


# ---------------------------------------------------------------- pipeline


def modulated_widths(config: ExperimentConfig, stream: int = 0) -> WidthSequence:
    if config.onoff:
        seq = generate_onoff_sequence(
            config.spec.duty_d, config.spec.period_t, config.num_periods, config.seed, stream
        )
        seq.spec = config.spec
        return seq
    return generate_width_sequence(
        config.spec, config.num_periods, config.seed, config.detector, stream
    )


def cont_density(config: ExperimentConfig):
    s = config.spec
    if config.onoff:
        return lambda f: onoff_s_cont(f, s.duty_d, s.period_t, s.amplitude_a)
    return lambda f: s_cont(f, s)


def model_spectrum(config: ExperimentConfig, f_grid=None, k_max=None):
    s = config.spec
    f_grid = config.grid() if f_grid is None else f_grid
    k_max = config.k_max if k_max is None else k_max
    if config.onoff:
        return onoff_spectrum(s.duty_d, s.period_t, s.amplitude_a, f_grid, k_max)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClippingWarning)
        return analytic_spectrum(s, f_grid, k_max)


def _mean_psd(psds: list[PsdEstimate]) -> PsdEstimate:
    first = psds[0]
    return PsdEstimate(
        delta_f=first.delta_f,
        bins=np.mean([p.bins for p in psds], axis=0),
        n_segments_used=sum(p.n_segments_used for p in psds),
        segment_length=first.segment_length,
    )


@dataclass
class Estimate:
    psd: PsdEstimate
    lines: list[HarmonicLine]
    per_seed: list[list[HarmonicLine]]
    clipped_fraction: float
    digest: str


def estimate(config: ExperimentConfig) -> Estimate:
    """Synthesize ``config.seeds`` realizations, estimate PSDs and extract lines."""
    density = cont_density(config)
    psds, per_seed, clipped, digests = [], [], 0, []
    for stream in range(config.seeds):
        widths = modulated_widths(config, stream)
        clipped += widths.clipped_count
        wave = synthesize_waveform(widths, config.sample_rate_fs, config.spec.amplitude_a)
        digests.append(io.digest(wave.samples))
        psd = welch_psd(wave, config.welch)
        cont = cont_on_grid(psd, density)
        per_seed.append(
            extract_harmonic_lines(psd, cont, config.spec.f0, config.k_max, config.band_bins)
        )
        psds.append(psd)
    mean_lines = [
        HarmonicLine(k, ln.freq, float(np.mean([seed[k - 1].power for seed in per_seed])))
        for k, ln in enumerate(per_seed[0], start=1)
    ]
    return Estimate(
        psd=_mean_psd(psds),
        lines=mean_lines,
        per_seed=per_seed,
        clipped_fraction=clipped / (config.num_periods * config.seeds),
        digest=digests[0] if len(digests) == 1 else io.combine_digests(digests),
    )


def unmodulated_psd(config: ExperimentConfig) -> PsdEstimate:
    widths = deterministic_width_sequence(config.spec, config.num_periods)
    wave = synthesize_waveform(widths, config.sample_rate_fs, config.spec.amplitude_a)
    return welch_psd(wave, config.welch)


def _safe_db(unmod: float, mod: float):
    # a line that vanishes in either train has no finite attenuation
    if unmod <= 1e-12 or mod <= 1e-12:
        return None
    return attenuation_db(unmod, mod)


@dataclass
class RunReport:
    analytic_lines: list[float]
    estimated_lines: list[float]
    unmodulated_lines: list[float]
    attenuation_db: list[float | None]
    estimated_attenuation_db: list[float | None]
    peak_reduction_db: float
    clipping_probability: float
    clipped_fraction: float
    power_balance: dict[str, float]
    seeds: int
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        def clean(obj):
            if isinstance(obj, dict):
                return {k: clean(v) for k, v in obj.items()}
            if isinstance(obj, list):
                return [clean(v) for v in obj]
            if isinstance(obj, float):
                return io.round6(obj)
            return obj

        return json.dumps(clean(asdict(self)), indent=2, sort_keys=True) + "\n"


def run(config: ExperimentConfig, out_dir=None) -> RunReport:
    """Synthesize, estimate, extract and compare; write artifacts to ``out_dir``.

    All powers in the report are rounded to six significant digits so that the
    report and its CSV files agree exactly.
    """
    spec = config.spec
    model = model_spectrum(config)
    unmod = unmodulated_spectrum(spec, config.k_max, config.grid())
    est = estimate(config)
    unmod_psd = unmodulated_psd(config)

    analytic = [io.round6(ln.power) for ln in model.lines[1:]]
    estimated = [io.round6(ln.power) for ln in est.lines]
    unmodulated = [io.round6(ln.power) for ln in unmod.lines[1:]]

    f0 = spec.f0
    bal_grid = default_grid(f0 / 100, 1000 * f0, f0 / 100)
    balance = power_balance(model_spectrum(config, bal_grid, 1000), 1000 * f0, 1000)
    p_clip = 0.0 if config.onoff else clipping_probability(spec)

    report = RunReport(
        analytic_lines=analytic,
        estimated_lines=estimated,
        unmodulated_lines=unmodulated,
        attenuation_db=[_safe_db(u, m) for u, m in zip(unmodulated, analytic)],
        estimated_attenuation_db=[_safe_db(u, m) for u, m in zip(unmodulated, estimated)],
        peak_reduction_db=peak_power_reduction_db(unmod_psd, est.psd),
        clipping_probability=p_clip,
        clipped_fraction=est.clipped_fraction,
        power_balance={
            "cont": balance.cont,
            "lines": balance.lines,
            "dc": balance.dc,
            "total": balance.total,
            "expected": balance.expected,
            "fraction": balance.fraction,
        },
        seeds=config.seeds,
        warnings=list(model.warnings),
    )

    if out_dir is not None:
        out = Path(out_dir)
        meta = config_meta(config)
        psd_meta = {**meta, "delta_f": est.psd.delta_f, "digest": est.digest}

        def as_lines(values):
            return [HarmonicLine(k, k * f0, p) for k, p in enumerate(values, start=1)]

        io.write_lines(out / "analytic_lines.csv", as_lines(analytic), meta)
        io.write_lines(out / "estimated_lines.csv", as_lines(estimated), psd_meta)
        io.write_lines(out / "unmodulated_lines.csv", as_lines(unmodulated), meta)
        io.write_density(out / "analytic_cont.csv", model.freqs, model.cont, meta)
        io.write_density(out / "psd.csv", est.psd.freqs, est.psd.bins, psd_meta)
        io.write_density(out / "psd_unmodulated.csv", unmod_psd.freqs, unmod_psd.bins, psd_meta)
        (out / "report.json").write_text(report.to_json())
    return report


# --------------------------------------------------------------- reproduce


def reproduce(target: str, seed: int = 1, out_dir=".", seeds: int = 1) -> list[Path]:
    """Write the CSV for one of the paper-style tables or figures."""
    if target not in TARGETS:
        raise ConfigError([f"target: unknown target {target!r}; choose from {sorted(TARGETS)}"])
    config = build_config({**PRESETS[TARGETS[target]], "seed": seed, "seeds": seeds})
    out = Path(out_dir)
    meta = {"target": target, **config_meta(config)}

    if target.startswith("table"):
        report = run(config)
        cols = ["row"] + [str(k) for k in range(1, config.k_max + 1)]
        rows = [
            ["unmodulated", *report.unmodulated_lines],
            ["analytic", *report.analytic_lines],
            ["simulation", *report.estimated_lines],
        ]
        return [io.write_csv(out / f"{target}.csv", cols, rows, meta)]

    est = estimate(config)
    unmod = unmodulated_psd(config)
    density = cont_density(config)
    f = est.psd.freqs
    cont = cont_on_grid(est.psd, density)
    sel = f <= config.f_grid[1]
    rows = zip(f[sel], est.psd.bins[sel], cont[sel], unmod.bins[sel])
    cols = ["freq_hz", "psd_estimated", "s_cont_analytic", "psd_unmodulated"]
    return [io.write_csv(out / f"{target}.csv", cols, rows, {**meta, "digest": est.digest})]


# --------------------------------------------------------------- argparse


_FLAGS = [
    ("--period", "period", float, "pulse period T in seconds"),
    ("--duty", "duty", float, "duty cycle D in (0, 1)"),
    ("--amplitude", "amplitude", float, "pulse amplitude A in volts"),
    ("--lambda-t", "lambda_t", float, "mean photon count per period"),
    ("--depth-b", "depth_b", float, "modulation depth b"),
    ("--sawtooth-amp", "sawtooth_amp", float, "sawtooth amplitude A_s"),
    ("--gain", "gain", float, "detector gain in volts per photon"),
    ("--noise-sigma", "noise_sigma", float, "detector noise std in volts"),
    ("--periods", "periods", int, "number of pulses per realization"),
    ("--fs", "fs", float, "sample rate in Hz"),
    ("--segments", "segments", int, "number of Welch segments"),
    ("--window", "window", str, "hann or rectangular"),
    ("--overlap", "overlap", float, "segment overlap fraction"),
    ("--seed", "seed", int, "random seed"),
    ("--seeds", "seeds", int, "number of realizations to average"),
    ("--kmax", "kmax", int, "highest harmonic reported"),
    ("--band-bins", "band_bins", int, "half-width of the line integration band in bins"),
    ("--f-min", "f_min", float, "analytic grid start (Hz)"),
    ("--f-max", "f_max", float, "analytic grid end (Hz)"),
    ("--f-step", "f_step", float, "analytic grid step (Hz)"),
]


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(2)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override it")
    for flag, dest, typ, help_ in _FLAGS:
        p.add_argument(flag, dest=dest, type=typ, default=None, help=help_)
    p.add_argument("--onoff", dest="onoff", action="store_true", default=None,
                   help="on-off modulation with lambda_T = -ln(1 - D)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgParser(prog="qpwm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgParser)
    for name, help_ in [
        ("synth", "write width and waveform CSVs"),
        ("analytic", "write the closed-form spectrum"),
        ("estimate", "write the Welch PSD and extracted lines"),
        ("run", "full pipeline with report.json"),
    ]:
        _add_common(sub.add_parser(name, help=help_))
    rp = sub.add_parser("reproduce", help="regenerate a table or figure as CSV")
    rp.add_argument("target", help=f"one of {', '.join(TARGETS)}")
    rp.add_argument("--seed", type=int, default=1)
    rp.add_argument("--seeds", type=int, default=1)
    rp.add_argument("--out", type=Path, default=Path("out"))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, object] = {}
    if args.config is not None:
        try:
            values = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError([f"config: file not found: {args.config}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: invalid JSON ({exc})"]) from None
        if not isinstance(values, dict):
            raise ConfigError(["config: top level must be a JSON object"])
    for key in DEFAULTS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    return build_config(values)


def _cmd_synth(config: ExperimentConfig, out: Path) -> None:
    widths = modulated_widths(config)
    wave = synthesize_waveform(widths, config.sample_rate_fs, config.spec.amplitude_a)
    meta = config_meta(config)
    io.write_widths(out / "widths.csv", widths.widths, {**meta, "clipped": widths.clipped_count})
    io.write_waveform(out / "waveform.csv", wave.samples, meta)


def _cmd_analytic(config: ExperimentConfig, out: Path) -> None:
    model = model_spectrum(config)
    meta = config_meta(config)
    io.write_density(out / "analytic_cont.csv", model.freqs, model.cont, meta)
    io.write_lines(out / "analytic_lines.csv", model.lines, meta)
    for note in model.warnings:
        log.warning(note)


def _cmd_estimate(config: ExperimentConfig, out: Path) -> None:
    est = estimate(config)
    meta = {**config_meta(config), "delta_f": est.psd.delta_f, "digest": est.digest}
    io.write_density(out / "psd.csv", est.psd.freqs, est.psd.bins, meta)
    io.write_lines(out / "estimated_lines.csv", est.lines, meta)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "reproduce":
            for path in reproduce(args.target, args.seed, args.out, args.seeds):
                print(path)
            return 0
        config = config_from_args(args)
        if args.command == "synth":
            _cmd_synth(config, args.out)
        elif args.command == "analytic":
            _cmd_analytic(config, args.out)
        elif args.command == "estimate":
            _cmd_estimate(config, args.out)
        else:
            report = run(config, args.out)
            sys.stdout.write(report.to_json())
        return 0
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"qpwm: error: {problem}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"qpwm: runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
