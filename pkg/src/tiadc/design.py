"""Wideband correction filter-bank design.

At each frequency on an N-point grid the M branch responses are found by
solving the M-by-M linear system that forces the interleaved output to be a
pure d-sample delay of the uniformly sampled input while nulling every alias
term. The grid responses are turned into real FIR taps by inverse DFT,
truncated around each branch's group delay, and windowed.

Frequency responses follow the numpy convention: a pure delay of d samples
is exp(-1j*omega*d). Branch m of an ideal bank is a pure delay of d + m
samples, which is the round-robin recombination delay plus the design
latency.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tiadc.model import (MismatchProfile, TiadcConfig, TiadcError, TWO_PI,
                         channel_response)

COND_LIMIT = 1e8

WINDOWS = ("none", "hann", "blackman", "kaiser")


class SingularDesignError(TiadcError):
    """The per-frequency reconstruction system is too ill-conditioned to solve."""

    def __init__(self, omega, detail=""):
        self.omega = omega
        msg = f"singular design system at omega = {omega:.6g} rad"
        super().__init__(msg + (f" ({detail})" if detail else ""))


@dataclass(frozen=True)
class DesignSpec:
    """Grid size, filter length, delay, window, and Nyquist zone for a design."""

    n_grid: int = 1024
    taps: int = 65
    delay_d: int | None = None
    window: str = "kaiser"
    kaiser_beta: float = 8.0
    zone: int = 1

    def __post_init__(self):
        n, L = self.n_grid, self.taps
        if n < 4 or n & (n - 1):
            raise ValueError("n_grid must be a power of two")
        if L % 2 == 0 or L < 1:
            raise ValueError("taps must be odd")
        if n < 4 * L:
            raise ValueError("n_grid must be at least 4 * taps")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")
        if self.zone not in (1, 2):
            raise ValueError("zone must be 1 or 2")
        if self.delay_d is None:
            object.__setattr__(self, "delay_d", (L - 1) // 2)
        if not 0 <= self.delay_d < n:
            raise ValueError("delay_d must lie in [0, n_grid)")

    @property
    def half_taps(self) -> int:
        return (self.taps - 1) // 2


def k_set(omega: float, m_channels: int, zone: int):
    """Alias indices contributing at digital frequency omega in [0, pi).

    Zone 1 keeps k with -pi <= omega - 2*pi*k/M < pi; zone 2 keeps k with
    pi <= |omega - 2*pi*k/M| < 2*pi (half-open at the lower magnitude end).
    The half-open conventions give exactly M members for every omega.
    """
    a = m_channels * omega / TWO_PI
    half = m_channels / 2.0
    if zone == 1:
        lo, hi = a - half, a + half
        return list(range(math.floor(lo) + 1, math.floor(hi) + 1))
    if zone == 2:
        left = range(math.floor(a - m_channels) + 1, math.floor(a - half) + 1)
        right = range(math.floor(a + half) + 1, math.floor(a + m_channels) + 1)
        return list(left) + list(right)
    raise ValueError("zone must be 1 or 2")


def signal_row(ks, m_channels: int) -> int:
    """Position of the alias index that carries the wanted signal.

    The signal occupies the alias class k = 0 (mod M): k = 0 for zone 1 and
    k = M for zone 2 at interior frequencies, with the sign of the
    representative flipping at the band-edge grid points. The k-set always
    holds exactly one member of that class.
    """
    rows = [i for i, k in enumerate(ks) if k % m_channels == 0]
    if len(rows) != 1:
        raise ValueError(f"alias set {ks} has no unique signal member")
    return rows[0]


def solve_pr_at(omega: float, profile: MismatchProfile, config: TiadcConfig,
                spec: DesignSpec) -> np.ndarray:
    """Branch responses F_m at one digital frequency.

    Row k of the system is sum_m F_m * H_m(j*(omega - 2*pi*k/M)/ts); the row
    of the signal alias index equals M*exp(-1j*omega*d) and every other row
    is zero. Negative analog frequencies enter through the conjugate symmetry
    of the channel responses.
    """
    m_ch = config.m_channels
    ks = k_set(omega, m_ch, spec.zone)
    omega_analog = (omega - TWO_PI * np.array(ks, dtype=np.float64) / m_ch) / config.ts
    a_mat = np.empty((m_ch, m_ch), dtype=np.complex128)
    for m in range(m_ch):
        a_mat[:, m] = channel_response(profile, config, m, omega_analog)
    cond = np.linalg.cond(a_mat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularDesignError(omega, f"condition number {cond:.3g}")
    b = np.zeros(m_ch, dtype=np.complex128)
    b[signal_row(ks, m_ch)] = m_ch * np.exp(-1j * omega * spec.delay_d)
    f = np.linalg.solve(a_mat, b)
    resid = np.linalg.norm(a_mat @ f - b)
    if resid > 1e-10 * np.linalg.norm(b):
        raise SingularDesignError(omega, f"solve residual {resid:.3g}")
    return f


def window_taps(name: str, length: int, beta: float = 8.0) -> np.ndarray:
    if name == "none":
        return np.ones(length)
    if name == "hann":
        return np.hanning(length)
    if name == "blackman":
        return np.blackman(length)
    if name == "kaiser":
        return np.kaiser(length, beta)
    raise ValueError(f"unknown window {name!r}")


@dataclass(frozen=True)
class FilterBank:
    """M real FIR branches plus the design metadata they were built with.

    taps[m, j] acts at absolute delay tap_offset + m + j, so each branch's
    window of length L is centered on its own group delay d + m.
    """

    taps: np.ndarray
    spec: DesignSpec
    m_channels: int
    fs: float

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        object.__setattr__(self, "taps", taps)
        if taps.shape != (self.m_channels, self.spec.taps):
            raise ValueError("taps must have shape (m_channels, spec.taps)")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps contain non-finite values")

    @property
    def tap_offset(self) -> int:
        return self.spec.delay_d - self.spec.half_taps

    @property
    def bank_id(self) -> str:
        h = hashlib.sha1()
        h.update(self.taps.tobytes())
        h.update(repr((self.m_channels, self.fs, self.spec)).encode())
        return h.hexdigest()[:12]

    def branch_response(self, omega) -> np.ndarray:
        """F_m(e^{j*omega}) of the truncated, windowed taps; shape (M, len(omega))."""
        omega = np.atleast_1d(np.asarray(omega, dtype=np.float64))
        m_idx = np.arange(self.m_channels)[:, None]
        j_idx = np.arange(self.spec.taps)[None, :]
        delays = self.tap_offset + m_idx + j_idx  # (M, L)
        return np.einsum("ml,mlw->mw", self.taps,
                         np.exp(-1j * delays[:, :, None] * omega[None, None, :]))


def design_filter_bank(profile: MismatchProfile, config: TiadcConfig,
                       spec: DesignSpec) -> FilterBank:
    """Solve the reconstruction condition on the design grid and extract taps.

    Responses are solved for grid frequencies 2*pi*n/N up to and including
    the half-band bin; the upper half of the grid is filled by conjugate
    symmetry so the inverse DFT is real. If the system is singular exactly at
    DC or the half-band bin, the adjacent bin's solution is reused there.
    Branch m keeps L taps centered on its group delay d + m, then the window
    is applied.
    """
    m_ch = config.m_channels
    n = spec.n_grid
    L = spec.taps
    d = spec.delay_d
    h = spec.half_taps
    if d - h < 0 or d + (m_ch - 1) + h >= n:
        raise ValueError(
            "delay_d leaves the tap window outside the design grid; "
            f"need {h} <= delay_d <= {n - m_ch - h}")
    half = n // 2
    grid = np.empty((m_ch, n), dtype=np.complex128)
    solved = {}
    for idx in range(half + 1):
        omega = TWO_PI * idx / n
        try:
            solved[idx] = solve_pr_at(omega, profile, config, spec)
        except SingularDesignError:
            if idx in (0, half):
                solved[idx] = None  # boundary bin, patch from neighbor below
            else:
                raise
    if solved[0] is None:
        if solved.get(1) is None:
            raise SingularDesignError(0.0, "no adjacent solution for the DC bin")
        solved[0] = solved[1]
    if solved[half] is None:
        if solved.get(half - 1) is None:
            raise SingularDesignError(np.pi, "no adjacent solution for the half-band bin")
        solved[half] = solved[half - 1]
    for idx in range(half + 1):
        grid[:, idx] = solved[idx]
    # real responses at the self-conjugate bins, then Hermitian fill
    grid[:, 0] = grid[:, 0].real
    grid[:, half] = grid[:, half].real
    grid[:, half + 1:] = np.conj(grid[:, half - 1:0:-1])
    impulse = np.fft.ifft(grid, axis=1)
    max_imag = float(np.max(np.abs(impulse.imag)))
    if max_imag > 1e-9:
        raise TiadcError(
            f"impulse responses are not real (max imaginary part {max_imag:.3g})")
    impulse = impulse.real
    win = window_taps(spec.window, L, spec.kaiser_beta)
    taps = np.empty((m_ch, L))
    for m in range(m_ch):
        start = d + m - h
        taps[m] = impulse[m, start:start + L] * win
    return FilterBank(taps=taps, spec=spec, m_channels=m_ch, fs=config.fs)


@dataclass(frozen=True)
class PRResidualReport:
    """Reconstruction residuals of a finished bank on a verification grid.

    residual_k0 is |Gamma_signal - M*exp(-1j*omega*d)| and residual_alias the
    largest |Gamma_k| over the alias indices, per grid frequency.
    """

    omegas: np.ndarray
    residual_k0: np.ndarray
    residual_alias: np.ndarray

    def max_alias(self, central_fraction: float = 1.0) -> float:
        n = self.omegas.size
        trim = int(round(n * (1.0 - central_fraction) / 2.0))
        sel = slice(trim, n - trim if trim else n)
        return float(np.max(self.residual_alias[sel]))


def pr_residual(bank: FilterBank, profile: MismatchProfile, config: TiadcConfig,
                n_check: int = 512, zone: int | None = None) -> PRResidualReport:
    """Recompute the reconstruction condition from the windowed taps.

    zone defaults to the zone the bank was designed for; passing the other
    zone evaluates the bank against that zone's alias set (negative control).
    """
    if n_check < 64:
        raise ValueError("n_check must be >= 64")
    zone = bank.spec.zone if zone is None else zone
    m_ch = bank.m_channels
    d = bank.spec.delay_d
    omegas = np.pi * np.arange(n_check) / n_check
    f_resp = bank.branch_response(omegas)  # (M, n_check)
    r0 = np.empty(n_check)
    ra = np.empty(n_check)
    for i, omega in enumerate(omegas):
        ks = k_set(omega, m_ch, zone)
        omega_analog = (omega - TWO_PI * np.array(ks) / m_ch) / config.ts
        h_mat = np.empty((m_ch, m_ch), dtype=np.complex128)
        for m in range(m_ch):
            h_mat[:, m] = channel_response(profile, config, m, omega_analog)
        gamma = h_mat @ f_resp[:, i]
        sig_row = signal_row(ks, m_ch)
        r0[i] = abs(gamma[sig_row] - m_ch * np.exp(-1j * omega * d))
        ra[i] = max(abs(gamma[r]) for r in range(m_ch) if r != sig_row)
    return PRResidualReport(omegas=omegas, residual_k0=r0, residual_alias=ra)


# --- file formats ------------------------------------------------------------

BANK_CSV_COLUMNS = "channel,tap_index,coefficient"


def write_bank_csv(bank: FilterBank, path):
    spec = bank.spec
    lines = [
        f"# m_channels,{bank.m_channels}",
        f"# taps,{spec.taps}",
        f"# n_grid,{spec.n_grid}",
        f"# delay_d,{spec.delay_d}",
        f"# zone,{spec.zone}",
        f"# window,{spec.window}",
        "# kaiser_beta,%.17g" % spec.kaiser_beta,
        "# fs_hz,%.17g" % bank.fs,
        BANK_CSV_COLUMNS,
    ]
    for m in range(bank.m_channels):
        for j in range(spec.taps):
            lines.append("%d,%d,%.17g" % (m, bank.tap_offset + m + j, bank.taps[m, j]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_bank_csv(path) -> FilterBank:
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, value = line[1:].split(",", 1)
            meta[key.strip()] = value.strip()
        elif line != BANK_CSV_COLUMNS:
            ch, idx, coef = line.split(",")
            rows.append((int(ch), int(idx), float(coef)))
    try:
        spec = DesignSpec(
            n_grid=int(meta["n_grid"]), taps=int(meta["taps"]),
            delay_d=int(meta["delay_d"]), window=meta["window"],
            kaiser_beta=float(meta["kaiser_beta"]), zone=int(meta["zone"]))
        m_ch = int(meta["m_channels"])
        fs = float(meta["fs_hz"])
    except KeyError as exc:
        raise TiadcError(f"{path}: missing bank header field {exc}") from None
    taps = np.zeros((m_ch, spec.taps))
    offset = spec.delay_d - spec.half_taps
    for ch, idx, coef in rows:
        taps[ch, idx - offset - ch] = coef
    return FilterBank(taps=taps, spec=spec, m_channels=m_ch, fs=fs)


def write_residual_csv(report: PRResidualReport, path):
    lines = ["omega_rad,residual_k0,residual_alias"]
    for i in range(report.omegas.size):
        lines.append("%.17g,%.17g,%.17g" % (
            report.omegas[i], report.residual_k0[i], report.residual_alias[i]))
    Path(path).write_text("\n".join(lines) + "\n")
