"""Spectra and dynamic performance metrics for interleaved-ADC records.

Single-sided amplitude spectra are referenced so a coherent sine at half the
full-scale range reads 0 dBFS. SNR, SINAD, THD, SFDR, and ENOB follow the
usual sine-test definitions; interleave images and offset spurs get their own
table with alias-index labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from tiadc.model import Capture, TiadcError, fold_frequency

DB_FLOOR = -300.0


def coherent_bin(f_target: float, fs: float, n_fft: int):
    """Pick a coherent test frequency near f_target for an n_fft record.

    Returns (J, f_actual) where J is the number of whole cycles in the
    record: the odd integer coprime to n_fft closest to f_target*n_fft/fs
    (ties go to the smaller J), and f_actual = J*fs/n_fft.
    """
    if not 0 < f_target < fs:
        raise ValueError("f_target must lie in (0, fs)")
    if n_fft < 4 or n_fft & (n_fft - 1):
        raise ValueError("n_fft must be a power of two")
    x = f_target * n_fft / fs
    best = None
    j0 = int(round(x))
    for step in range(n_fft):
        for j in sorted({j0 - step, j0 + step}):
            if j < 1 or j >= n_fft:
                continue
            if j % 2 == 1 and math.gcd(j, n_fft) == 1:
                cand = (abs(j - x), j)
                if best is None or cand < best:
                    best = cand
        if best is not None and step > best[0] + 1:
            break
    if best is None:
        raise ValueError(f"no usable coherent bin near {f_target} Hz")
    j = best[1]
    return j, j * fs / n_fft


@dataclass(frozen=True)
class SpurEntry:
    k: int
    freq_hz: float
    dbc: float
    kind: str  # "image" or "offset_spur"
    collision: bool = False


@dataclass(frozen=True)
class SpectrumReport:
    """FFT bins plus (once computed) the sine-test metric block."""

    n_fft: int
    window: str
    fs: float
    full_scale: float
    freqs_hz: np.ndarray
    power_dbfs: np.ndarray
    mean_square: np.ndarray  # per-bin contribution to the time-domain mean square
    fundamental_bin: int | None = None
    snr_db: float | None = None
    sinad_db: float | None = None
    thd_db: float | None = None
    sfdr_db: float | None = None
    enob_bits: float | None = None
    spurs: tuple = ()

    @property
    def n_bins(self) -> int:
        return self.freqs_hz.size

    def bin_of(self, freq_hz: float) -> int:
        return int(round(fold_frequency(freq_hz, self.fs) / self.fs * self.n_fft))


def _window_array(name: str, n: int) -> np.ndarray:
    if name == "none":
        return np.ones(n)
    if name == "hann":
        return np.hanning(n)
    if name == "blackman":
        return np.blackman(n)
    raise ValueError(f"unknown analysis window {name!r}")


def spectrum(capture: Capture, n_fft: int, window: str = "none") -> SpectrumReport:
    """Single-sided spectrum of the first n_fft non-transient samples."""
    x = capture.samples
    t = capture.transient_samples
    if t:
        x = x[t:x.size - t]
    if x.size < n_fft:
        raise ValueError(
            f"capture too short: {x.size} usable samples, n_fft = {n_fft}")
    x = x[:n_fft]
    w = _window_array(window, n_fft)
    cg = w.mean()
    bins = np.fft.rfft(x * w)
    amp = np.abs(bins) / (n_fft * cg)
    amp[1:-1] *= 2.0  # interior bins carry both spectral halves
    ref = capture.config.full_scale / 2.0
    power_dbfs = 20.0 * np.log10(np.maximum(amp / ref, 10.0 ** (DB_FLOOR / 20.0)))
    mean_square = amp ** 2 / 2.0
    mean_square[0] = amp[0] ** 2
    mean_square[-1] = amp[-1] ** 2
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / capture.fs)
    return SpectrumReport(
        n_fft=n_fft, window=window, fs=capture.fs,
        full_scale=capture.config.full_scale, freqs_hz=freqs,
        power_dbfs=power_dbfs, mean_square=mean_square)


def _gather_bins(report: SpectrumReport, center: int, width: int):
    lo = max(0, center - width)
    hi = min(report.n_bins - 1, center + width)
    return set(range(lo, hi + 1))


def dynamic_metrics(report: SpectrumReport, f_fund_hz: float | None = None,
                    m_channels: int = 1, harmonics: int = 5,
                    exclude_freqs=()) -> SpectrumReport:
    """Fill in SNR/SINAD/THD/SFDR/ENOB and the interleave spur table.

    SNR excludes the fundamental, DC, the first `harmonics` harmonic bins,
    and the interleave spur bins; SINAD excludes only the fundamental and DC,
    so interleave spurs degrade it (and ENOB). Windowed spectra gather 3 bins
    of energy around each line. exclude_freqs lists extra tones (e.g. the
    second tone of a two-tone test) removed from the noise and spur pools.
    """
    n_half = report.n_bins - 1
    ms = report.mean_square
    gather = 0 if report.window == "none" else 1
    if f_fund_hz is None:
        fund_bin = 1 + int(np.argmax(ms[1:n_half]))
    else:
        fund_bin = report.bin_of(f_fund_hz)
    if not 1 <= fund_bin < n_half:
        raise TiadcError("fundamental not inside (0, fs/2)")
    fund_bins = _gather_bins(report, fund_bin, gather)
    if ms[fund_bin] <= 0 or report.power_dbfs[fund_bin] <= DB_FLOOR + 1:
        raise TiadcError("fundamental not found above the measurement floor")
    dc_bins = _gather_bins(report, 0, gather)
    f_fund = report.freqs_hz[fund_bin]

    harm_bins: set[int] = set()
    for h in range(2, harmonics + 2):
        b = report.bin_of(h * f_fund)
        harm_bins |= _gather_bins(report, b, gather)
    spur_entries = []
    spur_bins: set[int] = set()
    if m_channels > 1:
        for entry in image_spur_levels(report, f_fund, report.fs, m_channels):
            spur_entries.append(entry)
            if not entry.collision:
                spur_bins |= _gather_bins(report, report.bin_of(entry.freq_hz), gather)
        for k in range(1, m_channels):
            b = report.bin_of(k * report.fs / m_channels)
            if b not in (0, fund_bin):
                level = _gathered_db(report, b, gather) - _gathered_db(report, fund_bin, gather)
                spur_entries.append(SpurEntry(
                    k=k, freq_hz=report.freqs_hz[b], dbc=level, kind="offset_spur"))
                spur_bins |= _gather_bins(report, b, gather)
    excl_bins: set[int] = set()
    for f in exclude_freqs:
        excl_bins |= _gather_bins(report, report.bin_of(f), gather)
    excl_bins -= fund_bins

    p_fund = float(sum(ms[b] for b in fund_bins))
    everything = set(range(report.n_bins))
    sinad_pool = everything - fund_bins - dc_bins - excl_bins
    noise_pool = sinad_pool - harm_bins - spur_bins
    p_sinad = float(sum(ms[b] for b in sinad_pool))
    p_noise = float(sum(ms[b] for b in noise_pool))
    p_harm = float(sum(ms[b] for b in harm_bins - fund_bins - dc_bins))
    snr = 10.0 * np.log10(p_fund / p_noise) if p_noise > 0 else float("inf")
    sinad = 10.0 * np.log10(p_fund / p_sinad) if p_sinad > 0 else float("inf")
    thd = 10.0 * np.log10(p_harm / p_fund) if p_harm > 0 else float("-inf")
    spur_candidates = everything - fund_bins - dc_bins - excl_bins
    max_spur_db = max(report.power_dbfs[b] for b in spur_candidates)
    sfdr = float(report.power_dbfs[fund_bin] - max_spur_db)
    enob = enob_from_sinad(sinad)
    return replace(report, fundamental_bin=fund_bin, snr_db=float(snr),
                   sinad_db=float(sinad), thd_db=float(thd), sfdr_db=sfdr,
                   enob_bits=enob, spurs=tuple(spur_entries))


def enob_from_sinad(sinad_db: float) -> float:
    return (sinad_db - 1.76) / 6.02


def _gathered_db(report: SpectrumReport, center: int, gather: int) -> float:
    p = sum(report.mean_square[b] for b in _gather_bins(report, center, gather))
    ref = (report.full_scale / 2.0) ** 2 / 2.0
    return 10.0 * np.log10(max(p / ref, 10.0 ** (DB_FLOOR / 10.0)))


def image_spur_levels(report: SpectrumReport, f_fund_hz: float, fs: float,
                      m_channels: int):
    """Power at the folded interleave-image frequencies, relative to the
    fundamental. Images that land on the fundamental bin are flagged as
    collisions instead of being reported as spurs."""
    fund_bin = report.bin_of(f_fund_hz)
    gather = 0 if report.window == "none" else 1
    fund_db = _gathered_db(report, fund_bin, gather)
    entries = []
    seen = set()
    for k in range(1, m_channels):
        for sign in (+1, -1):
            f_img = fold_frequency(k * fs / m_channels + sign * f_fund_hz, fs)
            b = report.bin_of(f_img)
            if b in seen:
                continue
            seen.add(b)
            collision = b == fund_bin
            level = (_gathered_db(report, b, gather) - fund_db) if not collision else 0.0
            entries.append(SpurEntry(k=k, freq_hz=report.freqs_hz[b], dbc=level,
                                     kind="image", collision=collision))
    return entries


# --- file formats ------------------------------------------------------------

def write_spectrum_csv(report: SpectrumReport, path):
    lines = ["freq_hz,power_dbfs"]
    for i in range(report.n_bins):
        lines.append("%.17g,%.17g" % (report.freqs_hz[i], report.power_dbfs[i]))
    if report.sinad_db is not None:
        lines += [
            "# snr_db,%.17g" % report.snr_db,
            "# sinad_db,%.17g" % report.sinad_db,
            "# thd_db,%.17g" % report.thd_db,
            "# sfdr_db,%.17g" % report.sfdr_db,
            "# enob_bits,%.17g" % report.enob_bits,
            "# fundamental_hz,%.17g" % report.freqs_hz[report.fundamental_bin],
        ]
    Path(path).write_text("\n".join(lines) + "\n")


def write_spur_csv(spurs, path):
    lines = ["k,freq_hz,dbc,kind"]
    for s in spurs:
        kind = s.kind + ("+collision" if s.collision else "")
        lines.append("%d,%.17g,%.17g,%s" % (s.k, s.freq_hz, s.dbc, kind))
    Path(path).write_text("\n".join(lines) + "\n")
