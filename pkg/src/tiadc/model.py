"""Acquisition model for an M-channel interleaved ADC.

Covers the per-channel analog response (gain and timing error tabulated over
frequency), round-robin sampling with an ideal mid-tread quantizer, and an
analytic oracle for the output line spectrum including interleave images and
offset spurs.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi


class TiadcError(Exception):
    """Base class for toolkit errors."""


@dataclass(frozen=True)
class TiadcConfig:
    """Aggregate acquisition parameters.

    fs is the combined sample rate in Hz; each of the m_channels sub-ADCs
    runs at fs / m_channels. full_scale is the peak-to-peak input range in
    volts. quantize toggles the ideal mid-tread quantizer.
    """

    m_channels: int
    fs: float
    bits: int
    full_scale: float
    quantize: bool = True

    def __post_init__(self):
        if self.m_channels < 2:
            raise ValueError("m_channels must be >= 2")
        if not (self.fs > 0 and np.isfinite(self.fs)):
            raise ValueError("fs must be positive and finite")
        if not 1 <= self.bits <= 24:
            raise ValueError("bits must be in [1, 24]")
        if not (self.full_scale > 0 and np.isfinite(self.full_scale)):
            raise ValueError("full_scale must be positive and finite")

    @property
    def ts(self) -> float:
        return 1.0 / self.fs

    @property
    def t1(self) -> float:
        """Per-channel sampling period (m_channels * ts)."""
        return self.m_channels / self.fs

    @property
    def lsb(self) -> float:
        return self.full_scale / 2 ** self.bits


@dataclass(frozen=True)
class MismatchProfile:
    """Per-channel gain, timing error, and offset, tabulated over frequency.

    All channels share one strictly increasing frequency grid. Queries between
    grid rows interpolate linearly; queries outside clamp to the end rows.
    Offsets are frequency independent (one value per channel, in LSB).
    """

    freqs_hz: np.ndarray
    gain: np.ndarray
    dt_s: np.ndarray
    offset_lsb: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.freqs_hz, dtype=np.float64))
        g = np.atleast_2d(np.asarray(self.gain, dtype=np.float64))
        d = np.atleast_2d(np.asarray(self.dt_s, dtype=np.float64))
        o = np.atleast_1d(np.asarray(self.offset_lsb, dtype=np.float64))
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "gain", g)
        object.__setattr__(self, "dt_s", d)
        object.__setattr__(self, "offset_lsb", o)
        if f.ndim != 1 or f.size < 1:
            raise ValueError("freqs_hz must be a non-empty 1-d array")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("freqs_hz must be strictly increasing")
        if g.shape != d.shape or g.shape[1] != f.size:
            raise ValueError("gain and dt_s must both have shape (M, len(freqs_hz))")
        if o.shape != (g.shape[0],):
            raise ValueError("offset_lsb must have one entry per channel")
        if not np.all(g > 0):
            raise ValueError("gain must be positive everywhere")
        for name, a in (("freqs_hz", f), ("gain", g), ("dt_s", d), ("offset_lsb", o)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def m_channels(self) -> int:
        return self.gain.shape[0]

    @property
    def n_rows(self) -> int:
        return self.freqs_hz.size

    @classmethod
    def ideal(cls, m_channels: int, f_max: float) -> "MismatchProfile":
        """Unit gain, zero timing error, zero offset over [0, f_max]."""
        freqs = np.array([0.0, float(f_max)])
        return cls(
            freqs_hz=freqs,
            gain=np.ones((m_channels, 2)),
            dt_s=np.zeros((m_channels, 2)),
            offset_lsb=np.zeros(m_channels),
        )

    def gain_at(self, m: int, freq_hz):
        return np.interp(freq_hz, self.freqs_hz, self.gain[m])

    def dt_at(self, m: int, freq_hz):
        return np.interp(freq_hz, self.freqs_hz, self.dt_s[m])


def channel_response(profile: MismatchProfile, config: TiadcConfig, m: int,
                     omega_rad_s):
    """Complex response g_m * exp(j*omega*(m*ts + dt_m)) of channel m.

    Gain and timing error are interpolated from the profile at |omega|; the
    signed exponent makes negative-frequency queries the conjugate of the
    positive-frequency ones, as required for real hardware.
    """
    if not 0 <= m < profile.m_channels:
        raise ValueError(f"channel index {m} out of range")
    omega = np.asarray(omega_rad_s, dtype=np.float64)
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega must be finite")
    f_abs = np.abs(omega) / TWO_PI
    g = profile.gain_at(m, f_abs)
    dt = profile.dt_at(m, f_abs)
    h = g * np.exp(1j * omega * (m * config.ts + dt))
    return complex(h) if np.isscalar(omega_rad_s) else h


@dataclass(frozen=True)
class Tone:
    amplitude: float
    freq_hz: float
    phase_rad: float = 0.0


@dataclass(frozen=True)
class ToneSpec:
    """Multi-tone test input: a list of cosines plus a DC term."""

    tones: tuple
    dc: float = 0.0

    def __post_init__(self):
        tones = tuple(
            t if isinstance(t, Tone) else Tone(*t) for t in self.tones
        )
        object.__setattr__(self, "tones", tones)
        for t in tones:
            if t.amplitude < 0:
                raise ValueError("tone amplitudes must be >= 0")
            if not np.isfinite(t.freq_hz) or t.freq_hz < 0:
                raise ValueError("tone frequencies must be finite and >= 0")

    @classmethod
    def single(cls, amplitude, freq_hz, phase_rad=0.0, dc=0.0):
        return cls(tones=(Tone(amplitude, freq_hz, phase_rad),), dc=dc)

    def peak_sum(self) -> float:
        return sum(t.amplitude for t in self.tones) + abs(self.dc)


@dataclass
class Capture:
    """An interleaved sample record plus its acquisition configuration."""

    samples: np.ndarray
    fs: float
    config: TiadcConfig
    transient_samples: int = 0
    corrected: bool = False
    bank_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("samples must be a non-empty 1-d array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")

    @property
    def n(self) -> int:
        return self.samples.size


def midtread_quantize(x, config: TiadcConfig):
    """Ideal mid-tread quantizer with saturation at the code range ends."""
    lsb = config.lsb
    top = 2 ** (config.bits - 1) - 1
    codes = np.clip(np.rint(np.asarray(x, dtype=np.float64) / lsb), -top - 1, top)
    return codes * lsb


def sample_channels(tones: ToneSpec, config: TiadcConfig,
                    profile: MismatchProfile, n_total: int):
    """Per-channel sample sequences for a multi-tone input.

    Channel m sees each tone through its own gain and timing error (looked up
    at the tone frequency), then its offset, then the quantizer if enabled.
    Returns a list of m_channels arrays of n_total / m_channels samples.
    """
    m_ch = config.m_channels
    if n_total <= 0 or n_total % m_ch != 0:
        raise ValueError("n_total must be a positive multiple of m_channels")
    if profile.m_channels != m_ch:
        raise ValueError("profile channel count does not match config")
    if tones.peak_sum() > config.full_scale / 2:
        warnings.warn("tone amplitudes exceed half the full-scale range; "
                      "the capture may clip", stacklevel=2)
    per = n_total // m_ch
    channels = []
    for m in range(m_ch):
        idx = np.arange(per) * m_ch + m
        t_nominal = idx * config.ts
        x = np.full(per, tones.dc + profile.offset_lsb[m] * config.lsb)
        for tone in tones.tones:
            omega = TWO_PI * tone.freq_hz
            g = float(profile.gain_at(m, tone.freq_hz))
            dt = float(profile.dt_at(m, tone.freq_hz))
            x += g * tone.amplitude * np.cos(omega * (t_nominal + dt) + tone.phase_rad)
        if config.quantize:
            x = midtread_quantize(x, config)
        channels.append(x)
    return channels


def interleave(channels, config: TiadcConfig) -> Capture:
    """Round-robin merge: output[i*M + m] = channels[m][i]."""
    m_ch = len(channels)
    if m_ch != config.m_channels:
        raise ValueError("channel count does not match config")
    lengths = {len(c) for c in channels}
    if len(lengths) != 1:
        raise ValueError("ragged channel lengths")
    per = lengths.pop()
    y = np.empty(per * m_ch)
    for m, c in enumerate(channels):
        y[m::m_ch] = c
    return Capture(samples=y, fs=config.fs, config=config)


def deinterleave(capture, m_channels=None):
    """Split an interleaved record back into its per-channel streams."""
    if isinstance(capture, Capture):
        x = capture.samples
        m_ch = capture.config.m_channels
    else:
        x = np.asarray(capture, dtype=np.float64)
        m_ch = m_channels
        if m_ch is None:
            raise ValueError("m_channels required for a bare array")
    if x.size % m_ch != 0:
        raise ValueError("record length is not a multiple of the channel count")
    return [x[m::m_ch].copy() for m in range(m_ch)]


def simulate_capture(tones: ToneSpec, config: TiadcConfig,
                     profile: MismatchProfile, n_total: int) -> Capture:
    return interleave(sample_channels(tones, config, profile, n_total), config)


def fold_frequency(freq_hz: float, fs: float) -> float:
    """Alias an analog frequency into the first Nyquist band [0, fs/2]."""
    r = np.abs(freq_hz) % fs
    return fs - r if r > fs / 2 else r


@dataclass(frozen=True)
class PredictedLine:
    """One spectral line of the analytic output model."""

    freq_hz: float
    amplitude_v: float
    kind: str  # "fundamental", "image", or "offset_spur"
    k: int

    @property
    def label(self) -> str:
        return self.kind if self.kind == "fundamental" else f"{self.kind}({self.k})"


def predict_output_spectrum(tones: ToneSpec, config: TiadcConfig,
                            profile: MismatchProfile, zone: int = 1):
    """Analytic line spectrum of the interleaved output (quantizer ignored).

    Each tone contributes a line at fold(k*fs/M +- f_tone) for every alias
    index k; the per-channel gains and timing errors (at the tone's true
    analog frequency) set the complex weights. Channel offsets add spurs at
    fold(k*fs/M). Lines that fold onto the same frequency are summed as
    complex amplitudes. The zone argument is informational only; the folding
    arithmetic covers any Nyquist zone.
    """
    m_ch = config.m_channels
    fs = config.fs
    # components: (theta in [0, 2pi), complex coeff, kind, k)
    components = []
    phase_k = np.exp(-2j * np.pi * np.outer(np.arange(m_ch), np.arange(m_ch)) / m_ch)
    for tone in tones.tones:
        if tone.amplitude == 0:
            continue
        omega = TWO_PI * tone.freq_hz
        g = np.array([profile.gain_at(m, tone.freq_hz) for m in range(m_ch)])
        dt = np.array([profile.dt_at(m, tone.freq_hz) for m in range(m_ch)])
        c_pos = g * np.exp(1j * omega * dt)
        # DFT over the channel index of the periodic modulation
        c_hat = phase_k.T @ c_pos / m_ch
        c_hat_neg = phase_k.T @ np.conj(c_pos) / m_ch
        theta0 = (omega / fs) % TWO_PI
        for k in range(m_ch):
            kind = "fundamental" if k == 0 else "image"
            zp = 0.5 * tone.amplitude * np.exp(1j * tone.phase_rad) * c_hat[k]
            zn = 0.5 * tone.amplitude * np.exp(-1j * tone.phase_rad) * c_hat_neg[k]
            components.append(((theta0 + TWO_PI * k / m_ch) % TWO_PI, zp, kind, k))
            components.append(((-theta0 + TWO_PI * k / m_ch) % TWO_PI, zn, kind, k))
    # offset spurs, plus the DC term of the input
    o_volts = profile.offset_lsb * config.lsb
    o_hat = phase_k.T @ o_volts / m_ch
    for k in range(m_ch):
        z = o_hat[k] + (tones.dc if k == 0 else 0.0)
        components.append((TWO_PI * k / m_ch, z, "offset_spur", k))

    # fold onto [0, pi] and merge coincident lines as complex sums
    folded = []
    for theta, z, kind, k in components:
        if theta > np.pi:
            theta, z = TWO_PI - theta, np.conj(z)
        folded.append((theta, z, kind, k))
    folded.sort(key=lambda c: c[0])
    kind_rank = {"fundamental": 0, "image": 1, "offset_spur": 2}
    lines = []
    tol = 1e-9
    i = 0
    while i < len(folded):
        j = i
        acc = 0.0 + 0.0j
        best = folded[i]
        while j < len(folded) and folded[j][0] - folded[i][0] <= tol:
            acc += folded[j][1]
            if kind_rank[folded[j][2]] < kind_rank[best[2]]:
                best = folded[j]
            j += 1
        amp = abs(acc)
        peak = max((t.amplitude for t in tones.tones), default=1.0) or 1.0
        if amp > 1e-13 * peak:
            lines.append(PredictedLine(
                freq_hz=folded[i][0] / TWO_PI * fs,
                amplitude_v=amp, kind=best[2], k=best[3]))
        i = j
    return lines


# --- reference mismatch shapes used by tests and bundled scenarios ----------

# Per-channel constants chosen so that every interleave image of a full-scale
# tone stays at least ~55 dB above the fundamental-relative floor anywhere in
# the first two Nyquist bands (no accidental cancellation across channels),
# while keeping |gain - 1| <= 1%, |dt| <= 2 ps, |offset| <= 2 LSB.
_REF_GAIN_BIAS = (0.0, -0.0055, 0.0072, 0.004)
_REF_GAIN_RIPPLE = (0.0, 0.002, -0.0018, 0.002)
_REF_GAIN_PHASE = (0.0, 0.9, 2.3, 4.2)
_REF_DT_CONST_PS = (0.0, 1.3, -1.55, 0.9)
_REF_DT_RIPPLE_PS = (0.0, -0.35, 0.3, 0.45)
_REF_OFFSET_LSB = (0.0, 1.9, -1.5, 0.8)


def make_reference_profile(config: TiadcConfig, n_rows: int = 65,
                           f_max: float | None = None) -> MismatchProfile:
    """Deterministic smooth mismatch profile covering [0, f_max].

    Gain ripple stays within +-1%, timing errors within +-2 ps, offsets
    within 2 LSB. Channel 0 is ideal so measured (relative) profiles can be
    compared against this truth directly. Channels beyond the built-in table
    cycle through the tabulated constants with a small phase twist.
    """
    m_ch = config.m_channels
    if f_max is None:
        f_max = config.fs
    freqs = np.linspace(0.0, f_max, n_rows)
    gain = np.ones((m_ch, n_rows))
    dt = np.zeros((m_ch, n_rows))
    offs = np.zeros(m_ch)
    n_tab = len(_REF_GAIN_BIAS)
    for m in range(1, m_ch):
        i = 1 + (m - 1) % (n_tab - 1)
        twist = 0.4 * (m // n_tab)
        gain[m] = (1.0 + _REF_GAIN_BIAS[i]
                   + _REF_GAIN_RIPPLE[i]
                   * np.sin(TWO_PI * freqs / (0.9 * config.fs)
                            + _REF_GAIN_PHASE[i] + twist))
        dt[m] = 1e-12 * (_REF_DT_CONST_PS[i]
                         + _REF_DT_RIPPLE_PS[i]
                         * np.sin(TWO_PI * freqs / (1.3 * config.fs)
                                  + 0.5 * m + twist))
        offs[m] = _REF_OFFSET_LSB[i]
    return MismatchProfile(freqs_hz=freqs, gain=gain, dt_s=dt, offset_lsb=offs)


# --- file formats ------------------------------------------------------------

PROFILE_CSV_HEADER = "channel,freq_hz,gain,dt_s,offset_lsb"


def write_profile_csv(profile: MismatchProfile, path):
    lines = [PROFILE_CSV_HEADER]
    for m in range(profile.m_channels):
        for r in range(profile.n_rows):
            lines.append("%d,%.17g,%.17g,%.17g,%.17g" % (
                m, profile.freqs_hz[r], profile.gain[m, r],
                profile.dt_s[m, r], profile.offset_lsb[m]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_profile_csv(path) -> MismatchProfile:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != PROFILE_CSV_HEADER:
        raise TiadcError(f"{path}: not a mismatch profile file")
    rows = {}
    for line in text[1:]:
        if not line.strip():
            continue
        ch, f, g, d, o = line.split(",")
        rows.setdefault(int(ch), []).append((float(f), float(g), float(d), float(o)))
    if not rows:
        raise TiadcError(f"{path}: empty profile")
    m_ch = max(rows) + 1
    if sorted(rows) != list(range(m_ch)):
        raise TiadcError(f"{path}: missing channels")
    freqs = np.array([r[0] for r in rows[0]])
    gain = np.empty((m_ch, freqs.size))
    dt = np.empty((m_ch, freqs.size))
    offs = np.empty(m_ch)
    for m in range(m_ch):
        tab = np.array(rows[m])
        if tab.shape[0] != freqs.size or not np.array_equal(tab[:, 0], freqs):
            raise TiadcError(f"{path}: channels do not share one frequency grid")
        gain[m] = tab[:, 1]
        dt[m] = tab[:, 2]
        # offset is a constant column; averaging only matters for hand-edited files
        col = tab[:, 3]
        offs[m] = col[0] if np.all(col == col[0]) else col.mean()
    return MismatchProfile(freqs_hz=freqs, gain=gain, dt_s=dt, offset_lsb=offs)


def save_capture(capture: Capture, path):
    """Raw little-endian float64 samples plus a JSON sidecar at <path>.json."""
    path = Path(path)
    path.write_bytes(capture.samples.astype("<f8").tobytes())
    meta = {
        "fs_hz": capture.fs,
        "m_channels": capture.config.m_channels,
        "bits": capture.config.bits,
        "full_scale_v": capture.config.full_scale,
        "n": capture.n,
        "quantize": capture.config.quantize,
    }
    if capture.corrected:
        meta["corrected"] = True
        meta["bank_id"] = capture.bank_id
        meta["transient_samples"] = capture.transient_samples
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=1) + "\n")


def load_capture(path) -> Capture:
    path = Path(path)
    sidecar = Path(str(path) + ".json")
    if not path.exists():
        raise FileNotFoundError(f"capture file not found: {path}")
    if not sidecar.exists():
        raise FileNotFoundError(f"capture sidecar not found: {sidecar}")
    meta = json.loads(sidecar.read_text())
    samples = np.frombuffer(path.read_bytes(), dtype="<f8").astype(np.float64)
    if samples.size != meta["n"]:
        raise TiadcError(f"{path}: sample count does not match sidecar")
    config = TiadcConfig(
        m_channels=meta["m_channels"], fs=meta["fs_hz"], bits=meta["bits"],
        full_scale=meta["full_scale_v"], quantize=meta.get("quantize", True))
    return Capture(
        samples=samples, fs=meta["fs_hz"], config=config,
        transient_samples=meta.get("transient_samples", 0),
        corrected=meta.get("corrected", False),
        bank_id=meta.get("bank_id", ""))
