"""Command-line interface and pipeline scenarios."""

import json

import numpy as np
import pytest

import tiadc
from tiadc.cli import main, load_scenario

CONFIG = {"m_channels": 4, "fs_hz": 1.6e9, "bits": 14, "full_scale_v": 2.0,
          "quantize": False}

TINY_SCENARIO = {
    "name": "tiny", "kind": "sweep", "seed": 7,
    "config": {"m_channels": 4, "fs_hz": 1.6e9, "bits": 14, "full_scale_v": 2.0},
    "truth_profile": {"type": "reference"},
    "calibration": {"n_freqs": 4, "f_lo_hz": 5e7, "f_hi_hz": 7.5e8,
                    "amplitude_v": 0.9, "n_samples": 2048, "quantize": True},
    "design": {"n_grid": 512, "taps": 33, "window": "kaiser",
               "kaiser_beta": 8.0, "zone": 1},
    "sweep": {"n_tones": 3, "f_lo_hz": 1e8, "f_hi_hz": 6e8, "amplitude_v": 0.9,
              "n_samples": 4096, "n_fft": 2048, "quantize": True},
    "thresholds": {"min_image_drop_db": 20.0, "min_enob_gain_bits": 1.0,
                   "min_enob_after_bits": 10.0, "spur_floor_dbfs": -70.0},
}


@pytest.fixture
def workdir(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(CONFIG))
    cfg = tiadc.TiadcConfig(m_channels=4, fs=1.6e9, bits=14, full_scale=2.0,
                            quantize=False)
    prof_path = tmp_path / "truth.csv"
    tiadc.write_profile_csv(tiadc.make_reference_profile(cfg), prof_path)
    ideal_path = tmp_path / "ideal.csv"
    tiadc.write_profile_csv(tiadc.MismatchProfile.ideal(4, cfg.fs), ideal_path)
    return tmp_path, cfg


class TestSimulate:
    def test_writes_capture(self, workdir, capsys):
        tmp, cfg = workdir
        rc = main(["simulate", "--config", str(tmp / "config.json"),
                   "--profile", str(tmp / "truth.csv"),
                   "--tone", "0.9:200e6", "--n", "8192",
                   "--out", str(tmp / "cap.f64")])
        assert rc == 0
        cap = tiadc.load_capture(tmp / "cap.f64")
        assert cap.n == 8192
        assert "fs = 1.6e+09" in capsys.readouterr().out

    def test_two_tones_present(self, workdir):
        tmp, cfg = workdir
        f1 = tiadc.coherent_bin(1.5e8, cfg.fs, 4096)[1]
        f2 = tiadc.coherent_bin(3.3e8, cfg.fs, 4096)[1]
        rc = main(["simulate", "--config", str(tmp / "config.json"),
                   "--profile", str(tmp / "ideal.csv"),
                   "--tone", f"0.4:{f1}", "--tone", f"0.3:{f2}",
                   "--n", "4096", "--out", str(tmp / "two.f64")])
        assert rc == 0
        rep = tiadc.spectrum(tiadc.load_capture(tmp / "two.f64"), 4096)
        assert rep.power_dbfs[rep.bin_of(f1)] > -8
        assert rep.power_dbfs[rep.bin_of(f2)] > -11

    def test_bad_length_exits_nonzero(self, workdir, capsys):
        tmp, _ = workdir
        rc = main(["simulate", "--config", str(tmp / "config.json"),
                   "--profile", str(tmp / "truth.csv"),
                   "--tone", "0.9:2e8", "--n", "8190",
                   "--out", str(tmp / "cap.f64")])
        assert rc != 0
        assert capsys.readouterr().err.startswith("error: ")


class TestCalibrate:
    def plan(self, tmp, cfg, n=6):
        freqs = [tiadc.coherent_bin(f, cfg.fs, 4096)[1]
                 for f in np.linspace(5e7, 7.5e8, n)]
        rows = [(f, 0.9, 4096) for f in freqs]
        path = tmp / "plan.csv"
        tiadc.calibration.write_plan_csv(rows, path)
        return path, freqs

    def test_round_trip_against_truth(self, workdir, capsys):
        tmp, cfg = workdir
        plan_path, freqs = self.plan(tmp, cfg)
        rc = main(["calibrate", "--config", str(tmp / "config.json"),
                   "--plan", str(plan_path),
                   "--truth-profile", str(tmp / "truth.csv"),
                   "--out", str(tmp / "measured.csv")])
        assert rc == 0
        measured = tiadc.read_profile_csv(tmp / "measured.csv")
        truth = tiadc.read_profile_csv(tmp / "truth.csv")
        for f in freqs:
            for m in range(4):
                assert abs(measured.gain_at(m, f) - truth.gain_at(m, f)) <= 1e-3

    def test_single_frequency_plan_rejected(self, workdir, capsys):
        tmp, cfg = workdir
        rows = [(tiadc.coherent_bin(2e8, cfg.fs, 4096)[1], 0.9, 4096)]
        path = tmp / "plan1.csv"
        tiadc.calibration.write_plan_csv(rows, path)
        rc = main(["calibrate", "--config", str(tmp / "config.json"),
                   "--plan", str(path),
                   "--truth-profile", str(tmp / "truth.csv"),
                   "--out", str(tmp / "m.csv")])
        assert rc != 0
        assert "error: " in capsys.readouterr().err

    def test_ingest_missing_capture_named(self, workdir, capsys):
        tmp, cfg = workdir
        plan_path, _ = self.plan(tmp, cfg, n=3)
        (tmp / "caps").mkdir()
        rc = main(["calibrate", "--config", str(tmp / "config.json"),
                   "--plan", str(plan_path), "--captures", str(tmp / "caps"),
                   "--out", str(tmp / "m.csv")])
        assert rc != 0
        assert "cal_000.f64" in capsys.readouterr().err


class TestDesign:
    def test_ideal_bank_is_impulses(self, workdir, capsys):
        tmp, _ = workdir
        rc = main(["design", "--config", str(tmp / "config.json"),
                   "--profile", str(tmp / "ideal.csv"), "--window", "none",
                   "--out", str(tmp / "bank.csv"),
                   "--residual-out", str(tmp / "resid.csv")])
        assert rc == 0
        bank = tiadc.read_bank_csv(tmp / "bank.csv")
        for m in range(4):
            assert bank.taps[m, 32] == pytest.approx(1.0, abs=1e-9)
        assert (tmp / "resid.csv").exists()
        assert "max alias residual" in capsys.readouterr().out

    def test_even_taps_rejected(self, workdir, capsys):
        tmp, _ = workdir
        rc = main(["design", "--config", str(tmp / "config.json"),
                   "--profile", str(tmp / "ideal.csv"), "--taps", "64",
                   "--out", str(tmp / "bank.csv")])
        assert rc != 0
        assert "odd" in capsys.readouterr().err

    def test_zone2_with_zone1_profile_warns(self, workdir, capsys):
        tmp, cfg = workdir
        prof = tiadc.MismatchProfile.ideal(4, cfg.fs / 2)  # first zone only
        tiadc.write_profile_csv(prof, tmp / "z1.csv")
        rc = main(["design", "--config", str(tmp / "config.json"),
                   "--profile", str(tmp / "z1.csv"), "--zone", "2",
                   "--out", str(tmp / "bank2.csv")])
        assert rc == 0
        assert "clamped" in capsys.readouterr().err


class TestCorrectAnalyze:
    def test_end_to_end_files(self, workdir, capsys):
        tmp, cfg = workdir
        f = tiadc.coherent_bin(3e8, cfg.fs, 4096)[1]
        assert main(["simulate", "--config", str(tmp / "config.json"),
                     "--profile", str(tmp / "truth.csv"),
                     "--tone", f"0.9:{f}", "--n", "8192",
                     "--out", str(tmp / "cap.f64")]) == 0
        assert main(["design", "--config", str(tmp / "config.json"),
                     "--profile", str(tmp / "truth.csv"),
                     "--out", str(tmp / "bank.csv")]) == 0
        assert main(["correct", "--capture", str(tmp / "cap.f64"),
                     "--bank", str(tmp / "bank.csv"),
                     "--profile", str(tmp / "truth.csv"),
                     "--out", str(tmp / "fixed.f64")]) == 0
        capsys.readouterr()
        assert main(["analyze", "--capture", str(tmp / "fixed.f64"),
                     "--n-fft", "4096", "--f-fund", str(f),
                     "--out-prefix", str(tmp / "fixed")]) == 0
        out = capsys.readouterr().out
        assert "enob_bits:" in out and "sfdr_db:" in out
        assert (tmp / "fixed_spectrum.csv").exists()
        assert (tmp / "fixed_spurs.csv").exists()

    def test_mismatched_bank_rejected(self, workdir, capsys):
        tmp, cfg = workdir
        cfg2 = tiadc.TiadcConfig(m_channels=2, fs=1.6e9, bits=14,
                                 full_scale=2.0, quantize=False)
        cap = tiadc.simulate_capture(
            tiadc.ToneSpec.single(0.5, 2e8), cfg2,
            tiadc.MismatchProfile.ideal(2, cfg2.fs), 512)
        tiadc.save_capture(cap, tmp / "cap2.f64")
        assert main(["design", "--config", str(tmp / "config.json"),
                     "--profile", str(tmp / "ideal.csv"),
                     "--out", str(tmp / "bank4.csv")]) == 0
        rc = main(["correct", "--capture", str(tmp / "cap2.f64"),
                   "--bank", str(tmp / "bank4.csv"),
                   "--out", str(tmp / "x.f64")])
        assert rc != 0
        assert capsys.readouterr().err.startswith("error: ")


class TestPipeline:
    def test_tiny_scenario_deterministic(self, tmp_path):
        scen_path = tmp_path / "tiny.json"
        scen_path.write_text(json.dumps(TINY_SCENARIO))
        outs = []
        for run in ("a", "b"):
            rc = main(["pipeline", "--scenario", str(scen_path),
                       "--out-dir", str(tmp_path / run)])
            assert rc == 0
            outs.append((tmp_path / run / "summary.csv").read_bytes())
        assert outs[0] == outs[1]
        header = outs[0].decode().splitlines()[0]
        assert header == ("f_in_hz,enob_before,enob_after,"
                          "max_image_dbc_before,max_image_dbc_after")

    def test_threshold_violation_exits_nonzero(self, tmp_path, capsys):
        scen = json.loads(json.dumps(TINY_SCENARIO))
        scen["thresholds"]["min_enob_after_bits"] = 20.0  # unattainable
        scen_path = tmp_path / "bad.json"
        scen_path.write_text(json.dumps(scen))
        rc = main(["pipeline", "--scenario", str(scen_path),
                   "--out-dir", str(tmp_path / "out")])
        assert rc != 0
        assert "threshold violation" in capsys.readouterr().err

    def test_missing_profile_names_stage(self, tmp_path, capsys):
        scen = json.loads(json.dumps(TINY_SCENARIO))
        scen["truth_profile"] = {"type": "csv", "path": str(tmp_path / "nope.csv")}
        scen_path = tmp_path / "missing.json"
        scen_path.write_text(json.dumps(scen))
        rc = main(["pipeline", "--scenario", str(scen_path),
                   "--out-dir", str(tmp_path / "out")])
        assert rc != 0
        assert "stage truth-profile" in capsys.readouterr().err

    def test_bundled_scenarios_load(self):
        for name in ("wideband_zone1", "undersampling_zone2", "twotone_zone1",
                     "narrowband_contrast"):
            scen = load_scenario(name)
            assert scen["name"] == name

    def test_unknown_scenario_errors(self, tmp_path, capsys):
        rc = main(["pipeline", "--scenario", str(tmp_path / "ghost.json"),
                   "--out-dir", str(tmp_path / "out")])
        assert rc != 0
        assert capsys.readouterr().err.startswith("error: ")
