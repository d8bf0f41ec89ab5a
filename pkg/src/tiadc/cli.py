"""Command-line front end: simulate, calibrate, design, correct, analyze, and
scripted end-to-end pipeline scenarios.

Every failure exits nonzero with a single "error: ..." line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from tiadc import calibration, correction, design, metrics, model
from tiadc.model import Capture, TiadcConfig, TiadcError, Tone, ToneSpec


def load_config(path) -> TiadcConfig:
    raw = json.loads(Path(path).read_text())
    try:
        return TiadcConfig(
            m_channels=int(raw["m_channels"]), fs=float(raw["fs_hz"]),
            bits=int(raw["bits"]), full_scale=float(raw["full_scale_v"]),
            quantize=bool(raw.get("quantize", True)))
    except KeyError as exc:
        raise TiadcError(f"{path}: missing config field {exc}") from None


def config_from_dict(raw: dict) -> TiadcConfig:
    return TiadcConfig(
        m_channels=int(raw["m_channels"]), fs=float(raw["fs_hz"]),
        bits=int(raw["bits"]), full_scale=float(raw["full_scale_v"]),
        quantize=bool(raw.get("quantize", True)))


def _parse_tone(text: str) -> Tone:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise TiadcError(f"tone must be AMPLITUDE:FREQ_HZ[:PHASE_RAD], got {text!r}")
    amp, freq = float(parts[0]), float(parts[1])
    phase = float(parts[2]) if len(parts) == 3 else 0.0
    return Tone(amplitude=amp, freq_hz=freq, phase_rad=phase)


# --- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    config = load_config(args.config)
    profile = model.read_profile_csv(args.profile)
    tones = ToneSpec(tones=tuple(_parse_tone(t) for t in args.tone), dc=args.dc)
    capture = model.simulate_capture(tones, config, profile, args.n)
    model.save_capture(capture, args.out)
    tone_txt = ", ".join(f"{t.amplitude:g} V @ {t.freq_hz:g} Hz" for t in tones.tones)
    print(f"simulated {capture.n} samples at fs = {config.fs:g} Hz, "
          f"M = {config.m_channels}, tones: {tone_txt}")
    return 0


def cmd_calibrate(args) -> int:
    config = load_config(args.config)
    plan = calibration.read_plan_csv(args.plan)
    if len(plan) < 2:
        raise TiadcError("calibration plan needs at least 2 frequencies")
    measurements = []
    if args.captures:
        for i, (freq, _amp, _n) in enumerate(plan):
            path = Path(args.captures) / f"cal_{i:03d}.f64"
            capture = model.load_capture(path)
            measurements.append(calibration.estimate_mismatch_at(capture, freq, config))
    else:
        if not args.truth_profile:
            raise TiadcError("either --captures or --truth-profile is required")
        truth = model.read_profile_csv(args.truth_profile)
        for freq, amp, n in plan:
            capture = model.simulate_capture(
                ToneSpec.single(amp, freq), config, truth, n)
            measurements.append(calibration.estimate_mismatch_at(capture, freq, config))
    profile = calibration.build_profile(measurements, config)
    model.write_profile_csv(profile, args.out)
    print(f"calibrated {len(measurements)} frequencies -> {args.out}")
    return 0


def _zone_band(zone: int, fs: float):
    return (0.0, fs / 2) if zone == 1 else (fs / 2, fs)


def cmd_design(args) -> int:
    config = load_config(args.config)
    profile = model.read_profile_csv(args.profile)
    spec = design.DesignSpec(
        n_grid=args.n_grid, taps=args.taps, delay_d=args.delay,
        window=args.window, kaiser_beta=args.kaiser_beta, zone=args.zone)
    lo, hi = _zone_band(spec.zone, config.fs)
    if profile.freqs_hz[0] > lo + 1e-6 * config.fs or profile.freqs_hz[-1] < hi - 1e-6 * config.fs:
        print(f"warning: profile table covers [{profile.freqs_hz[0]:g}, "
              f"{profile.freqs_hz[-1]:g}] Hz but zone {spec.zone} needs "
              f"[{lo:g}, {hi:g}] Hz; clamped end values will be used",
              file=sys.stderr)
    bank = design.design_filter_bank(profile, config, spec)
    design.write_bank_csv(bank, args.out)
    report = design.pr_residual(bank, profile, config, n_check=512)
    if args.residual_out:
        design.write_residual_csv(report, args.residual_out)
    print(f"designed bank {bank.bank_id} -> {args.out}; "
          f"max alias residual = {report.max_alias():.3e}")
    return 0


def cmd_correct(args) -> int:
    capture = model.load_capture(args.capture)
    bank = design.read_bank_csv(args.bank)
    out = capture
    if args.profile:
        profile = model.read_profile_csv(args.profile)
        out = correction.correct_offsets(out, profile)
    out = correction.correct(out, bank)
    model.save_capture(out, args.out)
    print(f"corrected {out.n} samples with bank {bank.bank_id} "
          f"({out.transient_samples} transient samples flagged)")
    return 0


def cmd_analyze(args) -> int:
    capture = model.load_capture(args.capture)
    report = metrics.spectrum(capture, args.n_fft, args.window)
    report = metrics.dynamic_metrics(
        report, f_fund_hz=args.f_fund,
        m_channels=capture.config.m_channels, harmonics=args.harmonics)
    prefix = args.out_prefix
    metrics.write_spectrum_csv(report, f"{prefix}_spectrum.csv")
    metrics.write_spur_csv(report.spurs, f"{prefix}_spurs.csv")
    print(f"fundamental: {report.freqs_hz[report.fundamental_bin]:g} Hz at "
          f"{report.power_dbfs[report.fundamental_bin]:.2f} dBFS")
    print(f"snr_db: {report.snr_db:.2f}")
    print(f"sinad_db: {report.sinad_db:.2f}")
    print(f"thd_db: {report.thd_db:.2f}")
    print(f"sfdr_db: {report.sfdr_db:.2f}")
    print(f"enob_bits: {report.enob_bits:.2f}")
    return 0


def cmd_pipeline(args) -> int:
    scenario = load_scenario(args.scenario)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_pipeline(scenario, out_dir)
    for line in result.log:
        print(line)
    print(f"summary -> {result.summary_path}")
    if not result.ok:
        for fail in result.failures:
            print(f"threshold violation: {fail}", file=sys.stderr)
        raise TiadcError(
            f"scenario {scenario.get('name', '?')}: "
            f"{len(result.failures)} threshold violation(s)")
    return 0


# --- pipeline scenarios -------------------------------------------------------

BUNDLED_SCENARIOS = ("wideband_zone1", "undersampling_zone2", "twotone_zone1",
                     "narrowband_contrast")


def load_scenario(name_or_path) -> dict:
    text = str(name_or_path)
    if text in BUNDLED_SCENARIOS:
        data = resources.files("tiadc.scenarios").joinpath(f"{text}.json").read_text()
        return json.loads(data)
    return json.loads(Path(text).read_text())


@dataclass
class PipelineResult:
    ok: bool
    rows: list
    failures: list
    skipped_spurs: int
    summary_path: Path
    log: list
    bank: object = None
    measured_profile: object = None


def _resolve_truth(scenario: dict, config: TiadcConfig):
    spec = scenario["truth_profile"]
    if spec["type"] == "reference":
        return model.make_reference_profile(config)
    if spec["type"] == "ideal":
        return model.MismatchProfile.ideal(config.m_channels, config.fs)
    if spec["type"] == "csv":
        return model.read_profile_csv(spec["path"])
    raise TiadcError(f"unknown truth_profile type {spec['type']!r}")


def _stage(name):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is None or (isinstance(exc, TiadcError)
                               and str(exc).startswith("stage ")):
                return False
            raise TiadcError(f"stage {name}: {exc}") from exc
    return _Ctx()


def _analyze(capture: Capture, n_fft: int, f_fund: float, m_channels: int,
             exclude_freqs=()):
    rep = metrics.spectrum(capture, n_fft, "none")
    return metrics.dynamic_metrics(rep, f_fund_hz=f_fund, m_channels=m_channels,
                                   exclude_freqs=exclude_freqs)


def _spur_targets(tones: ToneSpec, config: TiadcConfig, profile, floor_dbfs: float):
    """Predicted interleave-image lines worth tracking, plus a skipped count.

    Offset spurs are removed by the offset corrector, not the filter bank,
    and live near the measurement floor; the suppression check covers image
    lines only.
    """
    lines = model.predict_output_spectrum(tones, config, profile)
    ref = config.full_scale / 2.0
    targets, skipped = [], 0
    for ln in lines:
        if ln.kind != "image":
            continue
        level = 20.0 * np.log10(max(ln.amplitude_v / ref, 1e-30))
        if level < floor_dbfs:
            skipped += 1
            continue
        targets.append(ln)
    return targets, skipped


def run_pipeline(scenario: dict, out_dir: Path) -> PipelineResult:
    """Run calibrate -> design -> sweep for one scenario description."""
    out_dir = Path(out_dir)
    log = []
    kind = scenario.get("kind", "sweep")
    config = config_from_dict(scenario["config"])
    fs = config.fs

    with _stage("truth-profile"):
        truth = _resolve_truth(scenario, config)

    with _stage("calibrate"):
        cal = scenario["calibration"]
        cal_config = replace(config, quantize=bool(cal.get("quantize", True)))
        n_cal = int(cal["n_samples"])
        if "freqs_hz" in cal:
            raw_targets = [float(f) for f in cal["freqs_hz"]]
        else:
            raw_targets = list(np.linspace(float(cal["f_lo_hz"]),
                                           float(cal["f_hi_hz"]),
                                           int(cal["n_freqs"])))
        freqs = []
        for f in raw_targets:
            _, f_act = metrics.coherent_bin(f, fs, n_cal)
            if f_act not in freqs:
                freqs.append(f_act)
        amp = float(cal["amplitude_v"])
        measurements = []
        for f in freqs:
            capture = model.simulate_capture(ToneSpec.single(amp, f),
                                             cal_config, truth, n_cal)
            measurements.append(
                calibration.estimate_mismatch_at(capture, f, cal_config))
        if len(measurements) == 1:
            measured = calibration.constant_profile(measurements[0], config)
        else:
            measured = calibration.build_profile(measurements, config)
        profile_path = out_dir / "measured_profile.csv"
        model.write_profile_csv(measured, profile_path)
        log.append(f"calibrated {len(measurements)} frequencies -> {profile_path}")

    with _stage("design"):
        dsn = scenario["design"]
        spec = design.DesignSpec(
            n_grid=int(dsn.get("n_grid", 1024)), taps=int(dsn.get("taps", 65)),
            delay_d=dsn.get("delay_d"), window=dsn.get("window", "kaiser"),
            kaiser_beta=float(dsn.get("kaiser_beta", 8.0)),
            zone=int(dsn.get("zone", 1)))
        bank = design.design_filter_bank(measured, config, spec)
        bank_path = out_dir / "bank.csv"
        design.write_bank_csv(bank, bank_path)
        residual = design.pr_residual(bank, measured, config, n_check=512)
        design.write_residual_csv(residual, out_dir / "pr_residual.csv")
        log.append(f"designed bank {bank.bank_id}; max alias residual "
                   f"{residual.max_alias():.3e} -> {bank_path}")

    thresholds = scenario.get("thresholds", {})
    min_drop = thresholds.get("min_image_drop_db")
    min_gain = thresholds.get("min_enob_gain_bits")
    min_after = thresholds.get("min_enob_after_bits")
    floor_dbfs = float(thresholds.get("spur_floor_dbfs", -90.0))

    sweep = scenario["sweep"]
    n_fft = int(sweep["n_fft"])
    n_sim = int(sweep["n_samples"])
    sim_config = replace(config, quantize=bool(sweep.get("quantize", True)))
    amp = float(sweep["amplitude_v"])

    if kind == "two_tone":
        tone_specs = [
            (metrics.coherent_bin(float(t["f_target_hz"]), fs, n_fft)[1],
             float(t.get("amplitude_v", amp)))
            for t in scenario["tones"]]
        points = [tuple(tone_specs)]
    else:
        if "f_targets_hz" in sweep:
            targets = [float(f) for f in sweep["f_targets_hz"]]
        else:
            targets = list(np.linspace(float(sweep["f_lo_hz"]),
                                       float(sweep["f_hi_hz"]),
                                       int(sweep["n_tones"])))
        points = []
        for f in targets:
            _, f_act = metrics.coherent_bin(f, fs, n_fft)
            pt = ((f_act, amp),)
            if pt not in points:
                points.append(pt)

    rows = []
    failures = []
    total_skipped = 0
    with _stage("sweep"):
        for point in points:
            tones = ToneSpec(tones=tuple(Tone(a, f) for f, a in point))
            capture = model.simulate_capture(tones, sim_config, truth, n_sim)
            corrected = correction.correct(
                correction.correct_offsets(capture, measured), bank)
            spur_lines, skipped = _spur_targets(tones, config, truth, floor_dbfs)
            total_skipped += skipped
            rep_before = metrics.spectrum(capture, n_fft, "none")
            rep_after = metrics.spectrum(corrected, n_fft, "none")
            min_observed_drop = np.inf
            for ln in spur_lines:
                b = rep_before.bin_of(ln.freq_hz)
                if any(b == rep_before.bin_of(f) for f, _ in point):
                    continue  # folds onto a fundamental; skip as collision
                drop = rep_before.power_dbfs[b] - rep_after.power_dbfs[b]
                min_observed_drop = min(min_observed_drop, drop)
            for f_tone, _a in point:
                f_dig = model.fold_frequency(f_tone, fs)
                others = [model.fold_frequency(f2, fs) for f2, _ in point
                          if f2 != f_tone]
                before = _analyze(capture, n_fft, f_dig, config.m_channels, others)
                after = _analyze(corrected, n_fft, f_dig, config.m_channels, others)
                img_before = [s.dbc for s in before.spurs
                              if s.kind == "image" and not s.collision]
                img_after = [s.dbc for s in after.spurs
                             if s.kind == "image" and not s.collision]
                row = {
                    "f_in_hz": f_tone,
                    "enob_before": before.enob_bits,
                    "enob_after": after.enob_bits,
                    "max_image_dbc_before": max(img_before) if img_before else -np.inf,
                    "max_image_dbc_after": max(img_after) if img_after else -np.inf,
                    "min_image_drop_db": float(min_observed_drop),
                }
                rows.append(row)
                if kind != "narrowband_contrast":
                    if min_drop is not None and min_observed_drop < min_drop:
                        failures.append(
                            f"{f_tone:g} Hz: image drop {min_observed_drop:.1f} dB "
                            f"< {min_drop:g} dB")
                    if min_gain is not None and \
                            row["enob_after"] - row["enob_before"] < min_gain:
                        failures.append(
                            f"{f_tone:g} Hz: enob gain "
                            f"{row['enob_after'] - row['enob_before']:.2f} < {min_gain:g}")
                    if min_after is not None and row["enob_after"] < min_after:
                        failures.append(
                            f"{f_tone:g} Hz: enob after {row['enob_after']:.2f} "
                            f"< {min_after:g}")

    if kind == "narrowband_contrast":
        with _stage("contrast-check"):
            f_design = float(scenario["calibration"]["freqs_hz"][0])
            drop_at = {r["f_in_hz"]: r["min_image_drop_db"] for r in rows}
            f_near = min(drop_at, key=lambda f: abs(f - f_design))
            bound = float(min_drop if min_drop is not None else 30.0)
            if drop_at[f_near] < bound:
                failures.append(
                    f"design tone {f_near:g} Hz only dropped "
                    f"{drop_at[f_near]:.1f} dB")
            upper = [f for f in drop_at if f > fs / 4]
            if not any(drop_at[f] < bound for f in upper):
                failures.append(
                    "no upper-band tone violated the suppression bound; "
                    "narrowband design unexpectedly held wideband")

    summary_path = out_dir / "summary.csv"
    lines = ["f_in_hz,enob_before,enob_after,max_image_dbc_before,max_image_dbc_after"]
    for r in rows:
        lines.append("%.17g,%.17g,%.17g,%.17g,%.17g" % (
            r["f_in_hz"], r["enob_before"], r["enob_after"],
            r["max_image_dbc_before"], r["max_image_dbc_after"]))
    summary_path.write_text("\n".join(lines) + "\n")
    log.append(f"swept {len(rows)} point(s); {len(failures)} threshold violation(s)")
    return PipelineResult(ok=not failures, rows=rows, failures=failures,
                          skipped_spurs=total_skipped, summary_path=summary_path,
                          log=log, bank=bank, measured_profile=measured)


# --- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiadc",
        description="Interleaved-ADC mismatch simulation, calibration, "
                    "filter-bank correction, and dynamic metrics.")
    parser.add_argument("--seed", type=int, default=0,
                        help="RNG seed recorded for reproducibility (bundled "
                             "scenarios are noiseless)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an interleaved capture")
    p.add_argument("--config", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--tone", action="append", required=True,
                   metavar="AMP:FREQ[:PHASE]")
    p.add_argument("--dc", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="measure mismatches over a plan of tones")
    p.add_argument("--config", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--truth-profile", help="profile to simulate captures from")
    p.add_argument("--captures", help="directory of recorded captures cal_NNN.f64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("design", help="design a correction filter bank")
    p.add_argument("--config", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--n-grid", type=int, default=1024)
    p.add_argument("--taps", type=int, default=65)
    p.add_argument("--delay", type=int, default=None)
    p.add_argument("--window", default="kaiser", choices=design.WINDOWS)
    p.add_argument("--kaiser-beta", type=float, default=8.0)
    p.add_argument("--zone", type=int, default=1, choices=(1, 2))
    p.add_argument("--out", required=True)
    p.add_argument("--residual-out")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("correct", help="apply offset and filter-bank correction")
    p.add_argument("--capture", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--profile", help="profile for offset removal")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("analyze", help="spectrum and dynamic metrics of a capture")
    p.add_argument("--capture", required=True)
    p.add_argument("--n-fft", type=int, default=4096)
    p.add_argument("--window", default="none", choices=("none", "hann", "blackman"))
    p.add_argument("--f-fund", type=float, default=None)
    p.add_argument("--harmonics", type=int, default=5)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("pipeline", help="run a scripted scenario end to end")
    p.add_argument("--scenario", required=True,
                   help="path to a scenario JSON or one of: "
                        + ", ".join(BUNDLED_SCENARIOS))
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except (TiadcError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
