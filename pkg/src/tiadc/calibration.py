"""Mismatch estimation from injected sine tones.

A coherent tone is captured, the record is split per channel, and a
known-frequency three-parameter least-squares fit recovers each channel's
amplitude, phase, and DC. Gain and timing errors are reported relative to
channel 0; repeating over a series of frequencies yields an interpolatable
mismatch profile.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tiadc.model import (Capture, MismatchProfile, TiadcConfig, TiadcError,
                         ToneSpec, TWO_PI, deinterleave, simulate_capture)


class DegenerateInputError(TiadcError):
    """The fit problem is rank deficient (tone at DC or Nyquist of the fit rate)."""


class UnreliableMeasurementError(TiadcError):
    """Fundamental amplitude too close to the residual floor to trust."""


@dataclass(frozen=True)
class SineFitResult:
    amplitude: float
    phase_rad: float
    dc: float
    rms_residual: float


def sine_fit(samples, freq_ratio: float, known_freq: bool = True) -> SineFitResult:
    """Least-squares fit of A*cos(2*pi*freq_ratio*i + phi) + DC.

    freq_ratio is in cycles per sample and must lie strictly inside (0, 0.5).
    The fit is exact on noiseless model data. Only the known-frequency
    three-parameter variant is provided.
    """
    if not known_freq:
        raise NotImplementedError("only the known-frequency fit is supported")
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 8:
        raise ValueError("need at least 8 samples")
    if not 0.0 < freq_ratio < 0.5:
        raise DegenerateInputError(f"freq_ratio {freq_ratio} outside (0, 0.5)")
    i = np.arange(x.size)
    theta = TWO_PI * freq_ratio * i
    basis = np.column_stack([np.cos(theta), np.sin(theta), np.ones(x.size)])
    coef, _, rank, _ = np.linalg.lstsq(basis, x, rcond=None)
    if rank < 3:
        raise DegenerateInputError(
            f"rank-deficient fit at freq_ratio {freq_ratio}")
    a, b, dc = coef
    amplitude = float(np.hypot(a, b))
    phase = float(np.arctan2(-b, a))  # a = A*cos(phi), b = -A*sin(phi)
    resid = x - basis @ coef
    return SineFitResult(amplitude=amplitude, phase_rad=phase, dc=float(dc),
                         rms_residual=float(np.sqrt(np.mean(resid ** 2))))


@dataclass(frozen=True)
class MismatchMeasurement:
    """Relative mismatch of every channel at one injection frequency."""

    freq_hz: float
    gain_rel: np.ndarray
    dt_s: np.ndarray
    offset_lsb: np.ndarray

    @property
    def m_channels(self) -> int:
        return self.gain_rel.size


def _wrap_pm_pi(x):
    return (x + np.pi) % TWO_PI - np.pi


def estimate_mismatch_at(capture: Capture, f_in_hz: float,
                         config: TiadcConfig | None = None) -> MismatchMeasurement:
    """Per-channel relative gain/timing/offset from a single-tone capture.

    The capture must hold one coherent tone at f_in_hz (true analog
    frequency; for under-sampled captures pass the analog frequency, not its
    alias). Phase differences are unwrapped to the 2*pi multiple that
    minimizes |dt|, which limits usable timing errors to |dt| < pi/omega.
    """
    config = config or capture.config
    m_ch = config.m_channels
    if capture.n % m_ch != 0:
        raise ValueError("capture length must be a multiple of the channel count")
    cycles = f_in_hz * capture.n / config.fs
    if abs(cycles - round(cycles)) > 1e-6 * max(1.0, abs(cycles)):
        raise ValueError(
            f"tone at {f_in_hz} Hz is not coherent with a {capture.n}-sample record")
    channels = deinterleave(capture.samples, m_ch)
    ratio_raw = (f_in_hz * m_ch / config.fs) % 1.0
    if min(ratio_raw, abs(ratio_raw - 0.5), 1.0 - ratio_raw) < 1e-12:
        raise DegenerateInputError(
            f"tone at {f_in_hz} Hz aliases to DC or Nyquist of the channel rate")
    flip = ratio_raw > 0.5
    ratio = 1.0 - ratio_raw if flip else ratio_raw
    fits = [sine_fit(ch, ratio) for ch in channels]
    for m, fit in enumerate(fits):
        if fit.amplitude < 10.0 * fit.rms_residual:
            raise UnreliableMeasurementError(
                f"channel {m} fundamental at {f_in_hz} Hz is below 10x the noise floor")
    phases = np.array([(-f.phase_rad if flip else f.phase_rad) for f in fits])
    amps = np.array([f.amplitude for f in fits])
    if amps[0] == 0:
        raise UnreliableMeasurementError("reference channel has zero amplitude")
    omega = TWO_PI * f_in_hz
    gain_rel = amps / amps[0]
    gain_rel[0] = 1.0
    dphi = _wrap_pm_pi(phases - phases[0] - omega * np.arange(m_ch) * config.ts)
    dt = dphi / omega
    dt[0] = 0.0
    offs = np.array([f.dc for f in fits]) / config.lsb
    return MismatchMeasurement(freq_hz=f_in_hz, gain_rel=gain_rel, dt_s=dt,
                               offset_lsb=offs)


def build_profile(measurements, config: TiadcConfig) -> MismatchProfile:
    """Assemble measurements into a profile with linear interpolation knots.

    Offsets are averaged across the measurement frequencies into the constant
    per-channel offset column.
    """
    if len(measurements) < 2:
        raise ValueError("need at least 2 measurements at distinct frequencies")
    meas = sorted(measurements, key=lambda m: m.freq_hz)
    freqs = np.array([m.freq_hz for m in meas])
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("measurement frequencies must be distinct")
    m_ch = meas[0].m_channels
    if any(m.m_channels != m_ch for m in meas) or m_ch != config.m_channels:
        raise ValueError("inconsistent channel counts across measurements")
    gain = np.column_stack([m.gain_rel for m in meas])
    dt = np.column_stack([m.dt_s for m in meas])
    offs = np.mean(np.column_stack([m.offset_lsb for m in meas]), axis=1)
    return MismatchProfile(freqs_hz=freqs, gain=gain, dt_s=dt, offset_lsb=offs)


def constant_profile(measurement: MismatchMeasurement, config: TiadcConfig,
                     f_max: float | None = None) -> MismatchProfile:
    """Frequency-independent profile from one measurement (narrowband snapshot)."""
    f_hi = config.fs if f_max is None else f_max
    freqs = np.array([0.0, f_hi])
    return MismatchProfile(
        freqs_hz=freqs,
        gain=np.repeat(measurement.gain_rel[:, None], 2, axis=1),
        dt_s=np.repeat(measurement.dt_s[:, None], 2, axis=1),
        offset_lsb=measurement.offset_lsb.copy(),
    )


def run_calibration(truth_profile: MismatchProfile, config: TiadcConfig,
                    freqs_hz, amplitude: float, n_samples: int):
    """Simulate injection captures at each frequency and measure the mismatch.

    Returns (measurements, profile). Frequencies must already be coherent
    with the record length (see metrics.coherent_bin).
    """
    measurements = []
    for f in freqs_hz:
        cap = simulate_capture(ToneSpec.single(amplitude, f), config,
                               truth_profile, n_samples)
        measurements.append(estimate_mismatch_at(cap, f, config))
    return measurements, build_profile(measurements, config)


PLAN_CSV_HEADER = "freq_hz,amplitude_v,n_samples"


def write_plan_csv(rows, path):
    lines = [PLAN_CSV_HEADER]
    for f, a, n in rows:
        lines.append("%.17g,%.17g,%d" % (f, a, n))
    Path(path).write_text("\n".join(lines) + "\n")


def read_plan_csv(path):
    """Calibration plan rows as (freq_hz, amplitude_v, n_samples) tuples."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(header).strip() != PLAN_CSV_HEADER:
            raise TiadcError(f"{path}: not a calibration plan file")
        rows = [(float(r[0]), float(r[1]), int(r[2])) for r in reader if r]
    if not rows:
        raise TiadcError(f"{path}: empty calibration plan")
    return rows
