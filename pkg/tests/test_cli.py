import csv
import json
from pathlib import Path

import numpy as np
import pytest

import snvtune as st
from snvtune.cli import derive_seed, main
from snvtune.config import default_config_text, matched_sample_path, parse_config
from snvtune.spectroscopy import scan_from_csv


def run_cli(*args) -> int:
    return main([str(a) for a in args])


def read_csv_rows(path: Path):
    with path.open() as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        return list(reader)


class TestTuneCurve:
    def test_bulk_reference_never_shifts(self, tmp_path):
        assert run_cli("--out", tmp_path, "tune-curve",
                       "--emitters", "bulk_reference,axial_hinge",
                       "--steps", "7") == 0
        rows = read_csv_rows(tmp_path / "tune_curve.csv")
        bulk = [r for r in rows if r["emitter"] == "bulk_reference"]
        assert len(bulk) == 7
        assert all(float(r["shift_GHz"]) == 0.0 for r in bulk)

    def test_zero_voltage_row_is_exactly_zero(self, tmp_path):
        assert run_cli("--out", tmp_path, "tune-curve", "--steps", "5") == 0
        rows = read_csv_rows(tmp_path / "tune_curve.csv")
        for row in rows:
            if float(row["bias_V"]) == 0.0:
                assert row["shift_GHz"] == "0"

    def test_reloaded_axial_curve_is_monotone(self, tmp_path):
        assert run_cli("--out", tmp_path, "tune-curve",
                       "--emitters", "axial_hinge", "--steps", "17") == 0
        rows = read_csv_rows(tmp_path / "tune_curve.csv")
        shifts = [abs(float(r["shift_GHz"])) for r in rows]
        volts = [float(r["bias_V"]) for r in rows]
        assert volts == sorted(volts)
        assert all(b >= a for a, b in zip(shifts, shifts[1:]))

    def test_unknown_emitter_exits_2_and_lists_ids(self, tmp_path, capsys):
        assert run_cli("--out", tmp_path, "tune-curve",
                       "--emitters", "nope") == 2
        err = capsys.readouterr().err
        assert "nope" in err
        assert "axial_hinge" in err
        assert not (tmp_path / "tune_curve.csv").exists()

    def test_jobs_flag_gives_identical_output(self, tmp_path):
        run_cli("--out", tmp_path / "serial", "tune-curve", "--steps", "9")
        run_cli("--out", tmp_path / "par", "--jobs", "3", "tune-curve",
                "--steps", "9")
        assert ((tmp_path / "serial" / "tune_curve.csv").read_bytes()
                == (tmp_path / "par" / "tune_curve.csv").read_bytes())

    def test_provenance_headers_present(self, tmp_path, config):
        run_cli("--out", tmp_path, "--seed", "808", "tune-curve", "--steps", "3")
        head = (tmp_path / "tune_curve.csv").read_text().splitlines()[:4]
        assert head[0].startswith("# tool=snvtune")
        assert head[1] == "# command=tune-curve"
        assert head[2] == f"# config_sha256={config.config_hash()}"
        assert head[3] == "# seed=808"


class TestPle:
    def test_emits_scan_and_metadata(self, tmp_path):
        assert run_cli("--out", tmp_path, "ple", "--emitter", "axial_hinge",
                       "--bias", "75", "--points", "41") == 0
        scan = scan_from_csv(tmp_path / "ple_axial_hinge_75V.csv")
        assert scan.detunings.size == 41
        assert scan.bias_v == 75.0
        assert scan.emitter == "axial_hinge"

    def test_round_trip_matches_memory(self, tmp_path, config):
        run_cli("--out", tmp_path, "ple", "--emitter", "axial_hinge",
                "--bias", "30", "--points", "33", "--span", "3.0")
        scan = scan_from_csv(tmp_path / "ple_axial_hinge_30V.csv")
        emitter = config.emitter("axial_hinge")
        seed = derive_seed(config.seed, "ple", "axial_hinge", "30")
        curve = st.TuningCurve(emitter, config.device)
        center = float(curve.shift(30.0))
        det = center + np.linspace(-1.5, 1.5, 33)
        direct = st.simulate_ple(emitter, config.device, 30.0, det, 0.005,
                                 seed=seed)
        assert np.array_equal(scan.counts, direct.counts)
        np.testing.assert_allclose(scan.detunings, direct.detunings, rtol=1e-11)

    def test_window_warning_recorded(self, tmp_path):
        run_cli("--out", tmp_path, "ple", "--emitter", "axial_hinge",
                "--bias", "80", "--center", "0.0", "--span", "2.0",
                "--points", "17")
        meta = json.loads(
            (tmp_path / "ple_axial_hinge_80V.csv.meta.json").read_text())
        assert meta["window_warning"] is True

    def test_expected_value_mode(self, tmp_path):
        run_cli("--out", tmp_path, "--expected-value", "ple",
                "--emitter", "bulk_reference", "--bias", "10",
                "--points", "17")
        scan = scan_from_csv(tmp_path / "ple_bulk_reference_10V.csv")
        assert scan.expected is not None
        np.testing.assert_allclose(np.asarray(scan.counts, dtype=float),
                                   scan.expected, rtol=1e-11)

    def test_over_range_bias_exits_3(self, tmp_path):
        assert run_cli("--out", tmp_path, "ple", "--emitter", "axial_hinge",
                       "--bias", "500") == 3


class TestInhomo:
    def test_matched_dataset_fraction(self, tmp_path):
        assert run_cli("--out", tmp_path, "inhomo", "--matched") == 0
        summary = json.loads((tmp_path / "inhomo_summary.json").read_text())
        assert summary["best_window_fraction"] == pytest.approx(0.40, abs=1e-12)

    def test_single_resonance_input(self, tmp_path):
        src = tmp_path / "one.csv"
        src.write_text("frequency_GHz\n484111.25\n")
        assert run_cli("--out", tmp_path, "inhomo", "--input", src) == 0
        rows = read_csv_rows(tmp_path / "inhomo_cdf.csv")
        assert len(rows) == 1
        assert float(rows[0]["cdf"]) == 1.0
        summary = json.loads((tmp_path / "inhomo_summary.json").read_text())
        assert summary["best_window_fraction"] == 1.0

    def test_uniform_input_fraction_near_width_over_span(self, tmp_path):
        rng = np.random.default_rng(207)
        src = tmp_path / "uniform.csv"
        lines = ["frequency_GHz"] + [f"{v:.9f}" for v in rng.uniform(0, 100, 1000)]
        src.write_text("\n".join(lines) + "\n")
        run_cli("--out", tmp_path, "inhomo", "--input", src, "--window", "40")
        summary = json.loads((tmp_path / "inhomo_summary.json").read_text())
        sigma = np.sqrt(0.4 * 0.6 / 1000)
        assert abs(summary["best_window_fraction"] - 0.4) <= 3 * sigma

    def test_generated_sample_count(self, tmp_path):
        assert run_cli("--out", tmp_path, "inhomo", "--n", "64") == 0
        rows = read_csv_rows(tmp_path / "inhomo_cdf.csv")
        assert len(rows) == 64

    def test_empty_input_is_error(self, tmp_path):
        src = tmp_path / "empty.csv"
        src.write_text("frequency_GHz\n")
        assert run_cli("--out", tmp_path, "inhomo", "--input", src) == 2


class TestStabilize:
    def test_short_run_files_and_summary(self, tmp_path):
        assert run_cli("--out", tmp_path, "--seed", "77", "stabilize",
                       "--duration", "300", "--scans", "2") == 0
        summary = json.loads(
            (tmp_path / "stabilize_summary_77.json").read_text())
        assert summary["feedback"] is True
        assert summary["n_scans"] == 2
        updates = read_csv_rows(tmp_path / "stabilize_updates_77.csv")
        assert len(updates) == 1500  # 300 s at 5 Hz
        scans = read_csv_rows(tmp_path / "stabilize_scans_77.csv")
        assert len(scans) == 2

    def test_no_feedback_flag(self, tmp_path):
        assert run_cli("--out", tmp_path, "--seed", "78", "stabilize",
                       "--duration", "300", "--scans", "2",
                       "--no-feedback") == 0
        summary = json.loads(
            (tmp_path / "stabilize_summary_78.json").read_text())
        assert summary["feedback"] is False
        updates = read_csv_rows(tmp_path / "stabilize_updates_78.csv")
        assert all(r["error_GHz"] == "" for r in updates)
        assert all(r["dc_voltage_V"] == "40" for r in updates)

    def test_zero_duration_exits_2(self, tmp_path):
        assert run_cli("--out", tmp_path, "stabilize", "--duration", "0") == 2

    def test_multi_seed_jobs(self, tmp_path):
        assert run_cli("--out", tmp_path, "--jobs", "2", "stabilize",
                       "--duration", "240", "--scans", "1",
                       "--seeds", "5,6") == 0
        assert (tmp_path / "stabilize_summary_5.json").exists()
        assert (tmp_path / "stabilize_summary_6.json").exists()


class TestCalibratePulse:
    def test_safe_point_row_zero_and_marked(self, tmp_path):
        assert run_cli("--out", tmp_path, "calibrate-pulse",
                       "--pulses", "25,50,100",
                       "--cooldowns", "0,1500,3000") == 0
        rows = read_csv_rows(tmp_path / "pulse_calibration.csv")
        target = [r for r in rows if r["pulse_us"] == "50"
                  and r["cooldown_us"] == "1500"][0]
        assert target["offset_GHz"] == "0"
        assert target["safe"] == "1"

    def test_monotone_in_cooldown_along_rows(self, tmp_path):
        run_cli("--out", tmp_path, "calibrate-pulse", "--pulses", "120",
                "--cooldowns", "0,300,900,2700")
        rows = read_csv_rows(tmp_path / "pulse_calibration.csv")
        offsets = [float(r["offset_GHz"]) for r in rows]
        assert all(a <= b for a, b in zip(offsets, offsets[1:]))
        assert offsets[0] < 0.0

    def test_boundary_matches_relaxation_oracle(self, tmp_path, config):
        from oracles import geometric_heat_steady_state
        run_cli("--out", tmp_path, "calibrate-pulse", "--pulses", "100",
                "--cooldowns", "0")
        rows = read_csv_rows(tmp_path / "pulse_calibration.csv")
        th = config.device.thermal
        heat = geometric_heat_steady_state(100.0, 0.0, th.relax_time_us)
        safe = geometric_heat_steady_state(th.max_pulse_us, th.cooldown_time_us,
                                           th.relax_time_us)
        expected = -th.heat_shift_coeff * (heat - safe)
        assert float(rows[0]["offset_GHz"]) == pytest.approx(expected, rel=1e-9)


class TestConfigValidation:
    def test_missing_unit_tag_names_key(self, tmp_path, capsys):
        doc = json.loads(default_config_text())
        doc["physics"]["nu0"] = 484130.0  # untagged
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli("--config", bad, "--out", tmp_path, "tune-curve") == 2
        assert "physics.nu0" in capsys.readouterr().err

    def test_unknown_unit_names_key_and_options(self, tmp_path, capsys):
        doc = json.loads(default_config_text())
        doc["device"]["geometry"]["w_spring"] = {"value": 200, "unit": "furlong"}
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli("--config", bad, "--out", tmp_path, "tune-curve") == 2
        err = capsys.readouterr().err
        assert "w_spring" in err and "furlong" in err

    def test_constraint_violation_reported(self, tmp_path, capsys):
        doc = json.loads(default_config_text())
        doc["emitters"][0]["fwhm0"] = {"value": -5, "unit": "MHz"}
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli("--config", bad, "--out", tmp_path, "tune-curve") == 2
        assert "emitters[0]" in capsys.readouterr().err

    def test_emitter_outside_beam_rejected_at_load(self, tmp_path, capsys):
        doc = json.loads(default_config_text())
        doc["emitters"][0]["position"]["x"] = {"value": 25.0, "unit": "um"}
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli("--config", bad, "--out", tmp_path, "tune-curve") == 2
        assert "axial_hinge" in capsys.readouterr().err

    def test_no_partial_output_on_validation_failure(self, tmp_path):
        doc = json.loads(default_config_text())
        del doc["control"]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        out = tmp_path / "out"
        assert run_cli("--config", bad, "--out", out, "tune-curve") == 2
        assert not out.exists() or not list(out.iterdir())

    def test_round_trip_of_default_config(self):
        cfg = parse_config(default_config_text())
        assert set(cfg.emitters) == {"axial_hinge", "axial_mid",
                                     "transversal_hinge", "bulk_reference"}
        assert cfg.control.pid.update_rate_hz == 5.0

    def test_pho_unit_conversion(self):
        doc = json.loads(default_config_text())
        doc["physics"]["lambda_g"] = {"value": 0.85, "unit": "THz"}
        cfg = parse_config(json.dumps(doc))
        assert cfg.physics.spin_orbit.lambda_g == pytest.approx(850.0)


class TestReproducibility:
    COMMANDS = [
        ("tune-curve", "--steps", "5"),
        ("ple", "--emitter", "axial_hinge", "--bias", "40", "--points", "21"),
        ("inhomo", "--n", "50"),
        ("stabilize", "--duration", "120", "--scans", "1"),
        ("calibrate-pulse", "--pulses", "50,100", "--cooldowns", "0,1500"),
    ]

    @pytest.mark.parametrize("command", COMMANDS, ids=lambda c: c[0])
    def test_byte_identical_outputs(self, tmp_path, command):
        for sub in ("first", "second"):
            assert run_cli("--out", tmp_path / sub, "--seed", "4242",
                           *command) == 0
        first = sorted((tmp_path / "first").iterdir())
        second = sorted((tmp_path / "second").iterdir())
        assert [p.name for p in first] == [p.name for p in second]
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes(), a.name
