import json
import math

import numpy as np
import pytest

from qpwm import io
from qpwm.cli import (
    ConfigError,
    build_config,
    main,
    parse_config,
    reproduce,
    run,
)


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


class TestConfig:
    def test_defaults_are_table1(self, tmp_path):
        cfg = parse_config(write_json(tmp_path / "c.json", {}))
        s = cfg.spec
        assert (s.amplitude_a, s.period_t, s.lambda_t, s.depth_b) == (5.0, 1e-3, 2.0, 1.0)
        assert s.duty_d == pytest.approx(1 / 3)
        assert cfg.num_periods == 1000 and cfg.sample_rate_fs == 1e6
        assert cfg.welch.num_segments == 16 and cfg.welch.window.value == "hann"

    @pytest.mark.parametrize("bad", [{"duty": 1.0}, {"duty": 1.5}, {"seed": -3}, {"bogus": 1}])
    def test_rejected(self, tmp_path, bad):
        with pytest.raises(ConfigError):
            parse_config(write_json(tmp_path / "c.json", bad))

    def test_lists_every_offender(self):
        with pytest.raises(ConfigError) as err:
            build_config({"duty": 2.0, "amplitude": -1.0, "nope": 0, "periods": "many"})
        keys = {p.split(":")[0] for p in err.value.problems}
        assert keys == {"duty", "amplitude", "nope", "periods"}

    def test_non_integer_samples_per_period(self):
        with pytest.raises(ConfigError, match="fs"):
            build_config({"fs": 1234.5})

    def test_periods_must_cover_segments(self):
        with pytest.raises(ConfigError, match="periods"):
            build_config({"periods": 8, "segments": 16})

    def test_missing_file_and_bad_json(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "nope.json")
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "bad.json")

    def test_onoff_derives_rate(self):
        cfg = build_config({"onoff": True, "duty": 0.5, "amplitude": 2.0})
        assert cfg.spec.lambda_t == pytest.approx(math.log(2))


class TestRun:
    def test_table1_analytic_row(self, tmp_path):
        report = run(build_config({"seed": 1}), tmp_path)
        want = [1.59, 0.32, 0.14, 0.08, 0.06, 0.00, 0.03, 0.02]
        np.testing.assert_allclose(report.analytic_lines, want, atol=0.005)
        assert report.clipping_probability == pytest.approx(0.004534, abs=1e-5)
        assert report.warnings

    def test_unmodulated_config(self, tmp_path):
        report = run(build_config({"depth_b": 0.0, "duty": 0.25}))
        unmod = np.array(report.unmodulated_lines)
        est = np.array(report.estimated_lines)
        mask = unmod > 1e-6
        np.testing.assert_allclose(est[mask], unmod[mask], rtol=0.02)
        for db in report.attenuation_db:
            assert db is None or abs(db) < 1e-6
        assert abs(report.peak_reduction_db) < 1e-9

    def test_table2_seed_average(self):
        report = run(build_config({"lambda_t": 0.3, "depth_b": 0.5, "duty": 0.25, "seeds": 20}))
        assert report.estimated_lines[0] == pytest.approx(0.79, abs=0.05)

    def test_attenuation_consistent_with_csv(self, tmp_path):
        report = run(build_config({"lambda_t": 0.3, "depth_b": 0.5, "duty": 0.25}), tmp_path)
        _, _, unmod = io.read_csv(tmp_path / "unmodulated_lines.csv")
        _, _, mod = io.read_csv(tmp_path / "analytic_lines.csv")
        for u, m, db in zip(unmod, mod, report.attenuation_db):
            u, m = float(u[2]), float(m[2])
            if db is None:
                assert min(u, m) <= 1e-12
            else:
                assert db == pytest.approx(10 * math.log10(u / m), abs=1e-12)
        saved = json.loads((tmp_path / "report.json").read_text())
        assert saved["attenuation_db"] == [None if d is None else io.round6(d) for d in report.attenuation_db]

    def test_power_balance_in_report(self):
        report = run(build_config({}))
        assert report.power_balance["fraction"] == pytest.approx(1.0, abs=0.02)

    def test_artifacts_byte_identical(self, tmp_path):
        cfg = build_config({"seed": 7, "periods": 200, "segments": 4})
        run(cfg, tmp_path / "a")
        run(cfg, tmp_path / "b")
        for name in ("analytic_lines.csv", "estimated_lines.csv", "psd.csv", "report.json",
                     "analytic_cont.csv", "unmodulated_lines.csv", "psd_unmodulated.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_csv_headers_and_format(self, tmp_path):
        run(build_config({"periods": 160}), tmp_path)
        meta, cols, rows = io.read_csv(tmp_path / "psd.csv")
        assert cols == ["freq_hz", "psd_v2_per_hz"]
        assert meta["seed"] == "1" and meta["window"] == "hann" and len(meta["digest"]) == 16
        _, cols, rows = io.read_csv(tmp_path / "estimated_lines.csv")
        assert cols == ["k", "freq_hz", "power_v2"]
        assert rows[0][:2] == ["1", "1000"]


class TestReproduce:
    def test_table1(self, tmp_path):
        (path,) = reproduce("table1", seed=1, out_dir=tmp_path)
        _, cols, rows = io.read_csv(path)
        assert cols == ["row", "1", "2", "3", "4", "5", "6", "7", "8"]
        assert [r[0] for r in rows] == ["unmodulated", "analytic", "simulation"]
        unmod = [float(v) for v in rows[0][1:]]
        analytic = [float(v) for v in rows[1][1:]]
        sim = [float(v) for v in rows[2][1:]]
        np.testing.assert_allclose(unmod, [3.80, 0.95, 0.00, 0.24, 0.15, 0.00, 0.08, 0.06], atol=0.005)
        np.testing.assert_allclose(analytic, [1.59, 0.32, 0.14, 0.08, 0.06, 0.00, 0.03, 0.02], atol=0.005)
        np.testing.assert_allclose(sim, analytic, atol=0.3)

    def test_table2(self, tmp_path):
        (path,) = reproduce("table2", seed=1, out_dir=tmp_path)
        _, _, rows = io.read_csv(path)
        analytic = [float(v) for v in rows[1][1:]]
        np.testing.assert_allclose(analytic, [0.82, 0.41, 0.40, 0.21, 0.16, 0.05, 0.02, 0.00], atol=0.005)

    @pytest.mark.parametrize("target", ["fig3", "fig4", "fig5"])
    def test_figures(self, tmp_path, target):
        (path,) = reproduce(target, seed=2, out_dir=tmp_path)
        _, cols, rows = io.read_csv(path)
        assert cols == ["freq_hz", "psd_estimated", "s_cont_analytic", "psd_unmodulated"]
        f = np.array([float(r[0]) for r in rows])
        assert f[-1] <= 10_000 and f[1] == pytest.approx(16.0)

    def test_fig5_has_no_lines(self, tmp_path):
        (path,) = reproduce("fig5", seed=3, out_dir=tmp_path)
        _, _, rows = io.read_csv(path)
        data = np.array([[float(v) for v in r] for r in rows])
        f, est, cont, unmod = data.T
        at_harmonics = np.isin(f, [2000.0, 4000.0, 6000.0, 8000.0])
        # unmodulated D=0.5 train has lines only at odd harmonics; the bins at even
        # harmonics, and every harmonic bin of the on-off estimate, hold floor only
        floor = np.median(est[(f > 200) & (f < 9000)])
        assert np.all(est[at_harmonics] < 20 * floor)
        k1 = np.argmin(np.abs(f - 1000.0))
        assert unmod[k1] > 10 * est[k1]

    def test_unknown_target(self, tmp_path):
        with pytest.raises(ConfigError):
            reproduce("fig9", out_dir=tmp_path)


class TestMain:
    def test_run_exit_zero(self, tmp_path, capsys):
        assert main(["run", "--periods", "160", "--out", str(tmp_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out["analytic_lines"]) == 8
        assert (tmp_path / "report.json").exists()

    def test_usage_error_exit_two(self, tmp_path, capsys):
        assert main(["run", "--duty", "1.2", "--out", str(tmp_path)]) == 2
        assert "duty" in capsys.readouterr().err

    def test_bad_flag_exit_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--no-such-flag"])
        assert exc.value.code == 2

    def test_flags_override_file(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"duty": 0.25, "amplitude": 3.0, "periods": 160})
        assert main(["analytic", "--config", str(cfg), "--amplitude", "5", "--out", str(tmp_path)]) == 0
        meta, _, _ = io.read_csv(tmp_path / "analytic_lines.csv")
        assert meta["amplitude"] == "5" and meta["duty"] == "0.25"

    def test_synth_and_estimate(self, tmp_path):
        assert main(["synth", "--periods", "20", "--segments", "2", "--out", str(tmp_path)]) == 0
        _, cols, rows = io.read_csv(tmp_path / "widths.csv")
        assert cols == ["index", "width_seconds"] and len(rows) == 20
        _, cols, rows = io.read_csv(tmp_path / "waveform.csv")
        assert cols == ["sample_index", "volts"] and len(rows) == 20_000
        assert main(["estimate", "--onoff", "--duty", "0.5", "--periods", "160", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "estimated_lines.csv").exists()

    def test_reproduce_unknown_target_exit_two(self, tmp_path):
        assert main(["reproduce", "nope", "--out", str(tmp_path)]) == 2

    def test_runtime_error_exit_one(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["analytic", "--out", str(blocker / "sub")]) == 1
