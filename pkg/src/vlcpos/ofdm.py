"""Spatially grouped optical OFDM transmit/receive chain.

Each luminaire (VAP) builds one Hermitian-symmetric OFDM frame of size N.
The lower half hosts, per LED group m of size N/(2M):

  * one unit-power pilot at bin (m-1)*N/(2M) + k identifying LED m of VAP k,
  * optionally data symbols on bins (m-1)*N/(2M)+K+1 .. m*N/(2M)-1
    ("location and communication" mode, LCM),

with bin offsets 0..K reserved so that every pilot bin is globally unique
and the DC/Nyquist bins stay empty. A bank of M brick-wall masks of gain H
splits the frame into per-LED real time signals; each is hard-clipped to
the driver range [I_l, I_u] before (externally biased) emission. The
receiver applies the forward transform, reads the pilot magnitudes and
divides by H * C_F * R_pd * S_led so a noise-free pilot equals the DC
optical gain of its link.

Transforms are unitary (1/sqrt(N) both ways). The clipping analytics
(scaling factor C_F, clipping-noise variance, per-group channel capacity)
model each group signal as a zero-mean Gaussian of std sigma_m, with
clipping factor gamma = (I_u - I_l) / (2 sigma_m).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .errors import ConfigError, DomainError
from .frontend import ObservationVector

_SQRT2 = np.sqrt(2.0)


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class OfdmConfig:
    """Frame geometry and drive parameters for one VAP transmitter.

    mode "lom": pilots only (all modulation power on the location bins).
    mode "lcm": pilots plus data on the residual bins of every group.
    ``data_bins_override`` replaces the derived data-symbol count in the
    capacity formula only (sensitivity studies); allocation always uses the
    derived bin layout.
    """

    size: int = 1024
    leds_per_vap: int = 4
    vap_count: int = 4
    mode: str = "lom"
    gamma: float = 7.4
    upper_current_a: float = 1.0
    lower_current_a: float = -1.0
    bandwidth_hz: float = 10e6
    cp_len: int | None = None
    data_bins_override: int | None = None

    def __post_init__(self):
        if not _is_power_of_two(self.size):
            raise ConfigError(f"frame size must be a power of two, got {self.size}")
        if self.mode not in ("lom", "lcm"):
            raise ConfigError(f"mode must be 'lom' or 'lcm', got {self.mode!r}")
        if self.size % (2 * self.leds_per_vap) != 0:
            raise ConfigError("frame size must be divisible by 2*M")
        if self.group_size <= self.vap_count:
            raise ConfigError(
                f"group size {self.group_size} leaves no room for {self.vap_count} pilot offsets"
            )
        if self.gamma <= 0.0:
            raise ConfigError("clipping factor must be positive")
        if self.lower_current_a >= self.upper_current_a:
            raise ConfigError("lower clip limit must be below the upper limit")
        if self.cp_len is not None and not 0 <= self.cp_len < self.size:
            raise ConfigError("cyclic prefix length must lie in [0, N)")

    @property
    def group_size(self) -> int:
        """Lower-half bins owned by each LED group: N / (2M)."""
        return self.size // (2 * self.leds_per_vap)

    @property
    def cyclic_prefix(self) -> int:
        return self.size // 16 if self.cp_len is None else self.cp_len

    def pilot_bin(self, m: int, k: int) -> int:
        """Bin of the pilot of LED ``m`` (1..M) in VAP ``k`` (1..K)."""
        if not 1 <= m <= self.leds_per_vap:
            raise ConfigError(f"LED index {m} outside 1..{self.leds_per_vap}")
        if not 1 <= k <= self.vap_count:
            raise ConfigError(f"VAP index {k} outside 1..{self.vap_count}")
        return (m - 1) * self.group_size + k

    def data_bins(self, m: int) -> range:
        """Data bins of group ``m`` (empty in location-only mode)."""
        if self.mode != "lcm":
            return range(0)
        start = (m - 1) * self.group_size + self.vap_count + 1
        return range(start, m * self.group_size)

    @property
    def data_capacity(self) -> int:
        """Data symbols per frame: N/2 - M(K+1) in LCM, 0 in LOM."""
        if self.mode != "lcm":
            return 0
        return self.size // 2 - self.leds_per_vap * (self.vap_count + 1)

    @property
    def data_symbol_count(self) -> int:
        """Symbol count used by the capacity formula (override-able)."""
        if self.data_bins_override is not None:
            return self.data_bins_override
        return self.size // 2 - self.leds_per_vap * (self.vap_count + 1)

    @property
    def active_bins_per_group(self) -> int:
        """Nonzero lower-half bins per group: 1 pilot, plus data bins in LCM."""
        return 1 + len(self.data_bins(1))

    def with_mode(self, mode: str) -> "OfdmConfig":
        return OfdmConfig(
            size=self.size,
            leds_per_vap=self.leds_per_vap,
            vap_count=self.vap_count,
            mode=mode,
            gamma=self.gamma,
            upper_current_a=self.upper_current_a,
            lower_current_a=self.lower_current_a,
            bandwidth_hz=self.bandwidth_hz,
            cp_len=self.cp_len,
            data_bins_override=self.data_bins_override,
        )

    def with_gamma(self, gamma: float) -> "OfdmConfig":
        return OfdmConfig(
            size=self.size,
            leds_per_vap=self.leds_per_vap,
            vap_count=self.vap_count,
            mode=self.mode,
            gamma=gamma,
            upper_current_a=self.upper_current_a,
            lower_current_a=self.lower_current_a,
            bandwidth_hz=self.bandwidth_hz,
            cp_len=self.cp_len,
            data_bins_override=self.data_bins_override,
        )


@dataclass(frozen=True)
class OfdmFrame:
    """One transmitted frame: half-spectrum, full spectrum and per-LED signals."""

    symbols: np.ndarray  # X_DD, length N/2
    spectrum: np.ndarray  # Hermitian-extended, length N
    group_signals: np.ndarray  # (M, N) real, pre-clip
    clipped_signals: np.ndarray  # (M, N) real, within [I_l, I_u]
    cp_len: int


def qpsk_symbols(rng: np.random.Generator, count: int) -> np.ndarray:
    """Gray-mapped unit-modulus QPSK stream."""
    gray = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / _SQRT2
    return gray[rng.integers(0, 4, size=count)]


def allocate_pilots(
    cfg: OfdmConfig, k: int, pilot_symbols: np.ndarray | None = None
) -> np.ndarray:
    """Lower half-spectrum with only VAP ``k``'s M pilots populated.

    Pilot symbols must be unit modulus (fixed pilot power); default all-ones.
    """
    if pilot_symbols is None:
        pilots = np.ones(cfg.leds_per_vap, dtype=complex)
    else:
        pilots = np.asarray(pilot_symbols, dtype=complex)
        if pilots.shape != (cfg.leds_per_vap,):
            raise ConfigError(f"expected {cfg.leds_per_vap} pilot symbols")
        if np.any(np.abs(np.abs(pilots) - 1.0) > 1e-9):
            raise ConfigError("pilot symbols must have unit modulus")
    half = np.zeros(cfg.size // 2, dtype=complex)
    bins = [cfg.pilot_bin(m, k) for m in range(1, cfg.leds_per_vap + 1)]
    if len(set(bins)) != len(bins):
        raise ConfigError("pilot bin collision; invalid frame geometry")
    half[bins] = pilots
    return half


def allocate_data(
    cfg: OfdmConfig,
    k: int,
    data_symbols: np.ndarray,
    pilot_symbols: np.ndarray | None = None,
) -> np.ndarray:
    """Lower half-spectrum with VAP ``k``'s pilots plus its data payload.

    Data symbols fill each group's residual bins in order; a short stream is
    zero-padded, a long one rejected. In location-only mode the capacity is
    zero, so only an empty stream is accepted.
    """
    data = np.asarray(data_symbols, dtype=complex)
    if data.ndim != 1:
        raise ConfigError("data symbols must be a 1-D stream")
    if data.size > cfg.data_capacity:
        raise ConfigError(
            f"data stream of {data.size} symbols exceeds frame capacity {cfg.data_capacity}"
        )
    half = allocate_pilots(cfg, k, pilot_symbols)
    if data.size < cfg.data_capacity:
        data = np.concatenate([data, np.zeros(cfg.data_capacity - data.size, dtype=complex)])
    cursor = 0
    for m in range(1, cfg.leds_per_vap + 1):
        bins = cfg.data_bins(m)
        half[bins.start : bins.stop] = data[cursor : cursor + len(bins)]
        cursor += len(bins)
    return half


def hermitian_extend(half: np.ndarray) -> np.ndarray:
    """Full N-point spectrum whose inverse transform is real.

    X[i] = half[i] for i < N/2, X[N/2] = 0, X[i] = conj(half[N-i]) above.
    The DC bin must be empty (it carries the externally controlled bias).
    """
    half = np.asarray(half, dtype=complex)
    n = 2 * half.size
    if half[0] != 0:
        raise ConfigError("DC bin must be zero; bias is applied externally")
    full = np.zeros(n, dtype=complex)
    full[: n // 2] = half
    full[n // 2] = 0.0
    full[n // 2 + 1 :] = np.conj(half[1:][::-1])
    return full


def idft(spectrum: np.ndarray) -> np.ndarray:
    """Unitary inverse transform: x[i] = (1/sqrt(N)) sum X[n] e^{+j2pi ni/N}."""
    x = np.asarray(spectrum, dtype=complex)
    if not _is_power_of_two(x.size):
        raise ConfigError(f"transform size must be a power of two, got {x.size}")
    return np.fft.ifft(x) * np.sqrt(x.size)


def dft(signal: np.ndarray) -> np.ndarray:
    """Unitary forward transform: Y[i] = (1/sqrt(N)) sum y[n] e^{-j2pi ni/N}."""
    y = np.asarray(signal)
    if not _is_power_of_two(y.size):
        raise ConfigError(f"transform size must be a power of two, got {y.size}")
    return np.fft.fft(y) / np.sqrt(y.size)


def filter_bank(cfg: OfdmConfig, m: int, h_gain: float | None = None) -> np.ndarray:
    """Brick-wall mask of group ``m``: gain H on its bins, mirrored upstairs.

    The upper half follows mask[i] = mask[N-1-i], which forwards exactly the
    Hermitian images of the group's occupied bins (offset-0 bins are never
    populated), so each masked frame stays conjugate symmetric.
    """
    if not 1 <= m <= cfg.leds_per_vap:
        raise ConfigError(f"group index {m} outside 1..{cfg.leds_per_vap}")
    h = solve_h(cfg) if h_gain is None else float(h_gain)
    n = cfg.size
    mask = np.zeros(n)
    mask[(m - 1) * cfg.group_size : m * cfg.group_size] = h
    mask[n // 2 :] = mask[: n // 2][::-1]
    return mask


def group_std(cfg: OfdmConfig, h_gain: float) -> float:
    """Time-domain std of one group signal: sqrt(2 * N_active / N) * H."""
    return np.sqrt(2.0 * cfg.active_bins_per_group / cfg.size) * h_gain


def solve_h(cfg: OfdmConfig) -> float:
    """Filter gain H realizing the configured drive statistics.

    LCM: the group signal is a sum of many loaded bins, so it is sized as a
    Gaussian at the configured clipping factor: sigma_m = (I_u - I_l) /
    (2 gamma), then invert the group variance relation
    sigma_m^2 = (2/N) * N_active * H^2, with N_active the nonzero lower-half
    bins of one group.

    LOM: each group carries a single pilot tone, i.e. a pure cosine of
    amplitude 2H/sqrt(N). The Gaussian clipping design does not apply; the
    tone is driven rail-to-rail instead (amplitude (I_u - I_l)/2, effective
    clipping factor sqrt(2), no actual clipping), which is what makes the
    location-only mode concentrate all modulation power in the pilots.
    """
    swing = cfg.upper_current_a - cfg.lower_current_a
    if cfg.mode == "lom":
        # zero-mean tone: the reachable swing is bounded by the nearer rail
        if cfg.lower_current_a < 0.0 < cfg.upper_current_a:
            amplitude = min(cfg.upper_current_a, -cfg.lower_current_a)
        else:
            amplitude = swing / 2.0
        return amplitude * np.sqrt(float(cfg.size)) / 2.0
    n_act = cfg.active_bins_per_group
    if n_act == 0:
        raise ConfigError("no active bins in group; cannot size the filter gain")
    sigma_m = swing / (2.0 * cfg.gamma)
    return sigma_m * np.sqrt(cfg.size / (2.0 * n_act))


def effective_scaling(cfg: OfdmConfig) -> float:
    """Amplitude attenuation the receiver must divide out.

    The erfc-based C_F models clipped Gaussian groups (LCM). A full-swing
    LOM pilot tone never clips, so its attenuation is exactly 1.
    """
    return 1.0 if cfg.mode == "lom" else scaling_factor(cfg.gamma)


def hard_clip(signal: np.ndarray, lower: float, upper: float) -> np.ndarray:
    """Element-wise clamp to the driver range [lower, upper]."""
    if lower >= upper:
        raise ConfigError("lower clip limit must be below the upper limit")
    return np.clip(np.asarray(signal, dtype=float), lower, upper)


def scaling_factor(gamma) -> float:
    """Amplitude attenuation C_F = 1 - erfc(gamma / sqrt(2)) of a clipped Gaussian."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0.0):
        raise DomainError("clipping factor must be positive")
    out = 1.0 - erfc(gamma / _SQRT2)
    return float(out) if out.ndim == 0 else out


def _q(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def _gauss(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def clipping_noise_variance(gamma, upper: float, lower: float):
    """Variance of the distortion clip(x) - C * x for x ~ N(0, sigma_m^2) [A^2].

    General two-sided form with lambda_l = I_l/sigma_m, lambda_u = I_u/sigma_m
    and C the unclipped probability mass; sigma_m = (I_u - I_l) / (2 gamma).
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0.0):
        raise DomainError("clipping factor must be positive")
    if lower >= upper:
        raise ConfigError("lower clip limit must be below the upper limit")
    sigma_m = (upper - lower) / (2.0 * gamma)
    lam_l = lower / sigma_m
    lam_u = upper / sigma_m
    c = _q(lam_l) - _q(lam_u)
    mean_term = (
        _gauss(lam_l) - _gauss(lam_u) + (1.0 - _q(lam_l)) * lam_l + _q(lam_u) * lam_u
    )
    out = sigma_m**2 * (
        c
        - c**2
        + (1.0 - _q(lam_l)) * lam_l**2
        + _q(lam_u) * lam_u**2
        - mean_term**2
        + _gauss(lam_l) * lam_l
        - _gauss(lam_u) * lam_u
    )
    return float(out) if out.ndim == 0 else out


def clipping_noise_variance_symmetric(gamma, upper: float):
    """Symmetric-rails (I_l = -I_u) reduction of :func:`clipping_noise_variance`."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0.0):
        raise DomainError("clipping factor must be positive")
    sigma_m = upper / gamma
    c = 1.0 - erfc(gamma / _SQRT2)
    out = sigma_m**2 * (c - c**2 + 2.0 * _q(gamma) * gamma**2 - 2.0 * _gauss(gamma) * gamma)
    return float(out) if out.ndim == 0 else out


def channel_capacity(cfg: OfdmConfig, electric_gain: float, sigma2_n: float, gamma: float | None = None):
    """Per-group data capacity under symmetric clipping [bit/s].

    C_m = (B/N)(N_D/M) log2(1 + (I_u^2/(2 gamma^2)) C_F G_E /
                                ((sigma_n^2 + sigma_clip^2) N_D/(N M)))
    """
    if electric_gain <= 0.0 or sigma2_n <= 0.0:
        raise DomainError("electric gain and noise variance must be positive")
    g = cfg.gamma if gamma is None else gamma
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0.0):
        raise DomainError("clipping factor must be positive")
    n, m = cfg.size, cfg.leds_per_vap
    n_d = cfg.data_symbol_count
    c_f = 1.0 - erfc(g / _SQRT2)
    sigma2_clip = clipping_noise_variance(g, cfg.upper_current_a, cfg.lower_current_a)
    signal = cfg.upper_current_a**2 / (2.0 * g**2) * c_f * electric_gain
    noise = (sigma2_n + sigma2_clip) * n_d / (n * m)
    out = (cfg.bandwidth_hz / n) * (n_d / m) * np.log2(1.0 + signal / noise)
    return float(out) if out.ndim == 0 else out


def modulate_vap(
    cfg: OfdmConfig,
    k: int,
    rng: np.random.Generator | None = None,
    data_symbols: np.ndarray | None = None,
    pilot_symbols: np.ndarray | None = None,
    h_gain: float | None = None,
) -> OfdmFrame:
    """Build VAP ``k``'s frame: allocate, extend, split into groups, clip.

    In LCM mode the data payload comes from ``data_symbols`` or, when absent,
    from Gray-mapped QPSK drawn off ``rng``.
    """
    if cfg.mode == "lcm":
        if data_symbols is None:
            if rng is None:
                raise ConfigError("LCM frames need data symbols or an rng to draw them")
            data_symbols = qpsk_symbols(rng, cfg.data_capacity)
        half = allocate_data(cfg, k, data_symbols, pilot_symbols)
    else:
        half = allocate_pilots(cfg, k, pilot_symbols)
    spectrum = hermitian_extend(half)
    h = solve_h(cfg) if h_gain is None else float(h_gain)

    group_signals = np.empty((cfg.leds_per_vap, cfg.size))
    for m in range(1, cfg.leds_per_vap + 1):
        masked = filter_bank(cfg, m, h) * spectrum
        x = idft(masked)
        group_signals[m - 1] = x.real
    clipped = hard_clip(group_signals, cfg.lower_current_a, cfg.upper_current_a)
    return OfdmFrame(
        symbols=half,
        spectrum=spectrum,
        group_signals=group_signals,
        clipped_signals=clipped,
        cp_len=cfg.cyclic_prefix,
    )


def add_cyclic_prefix(signal: np.ndarray, cp_len: int) -> np.ndarray:
    """Prepend the last ``cp_len`` samples."""
    x = np.asarray(signal)
    if not 0 <= cp_len < x.shape[-1]:
        raise ConfigError("cyclic prefix length must lie in [0, N)")
    if cp_len == 0:
        return x.copy()
    return np.concatenate([x[..., -cp_len:], x], axis=-1)


def remove_cyclic_prefix(signal: np.ndarray, cp_len: int) -> np.ndarray:
    """Drop the first ``cp_len`` samples."""
    x = np.asarray(signal)
    return x[..., cp_len:].copy()


@dataclass(frozen=True)
class RssCalibration:
    """Receiver-side constants that normalize pilot magnitudes to optical gains."""

    h_gain: float
    scaling: float  # C_F
    responsivity_a_per_w: float
    conversion_w_per_a: float  # S_led

    def __post_init__(self):
        for name in ("h_gain", "scaling", "responsivity_a_per_w", "conversion_w_per_a"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"calibration constant {name} must be positive")

    @property
    def denominator(self) -> float:
        return self.h_gain * self.scaling * self.responsivity_a_per_w * self.conversion_w_per_a


def demodulate_rss(signal: np.ndarray, cfg: OfdmConfig, calibration: RssCalibration) -> ObservationVector:
    """Extract the normalized RSS vector from one received frame (CP removed).

    For every link: s[(k-1)M + (m-1)] = |Y[pilot bin]| / (H C_F R_pd S_led).
    """
    y = np.asarray(signal)
    if y.shape[-1] != cfg.size:
        raise ConfigError(f"expected a frame of {cfg.size} samples, got {y.shape[-1]}")
    spectrum = dft(y)
    m_count, k_count = cfg.leds_per_vap, cfg.vap_count
    values = np.empty(m_count * k_count)
    for k in range(1, k_count + 1):
        for m in range(1, m_count + 1):
            values[(k - 1) * m_count + (m - 1)] = np.abs(spectrum[cfg.pilot_bin(m, k)])
    values /= calibration.denominator
    return ObservationVector(values=values, leds_per_vap=m_count, vap_count=k_count)


def papr(signal: np.ndarray) -> float:
    """Peak-to-average power ratio of a real signal (linear, not dB)."""
    x = np.asarray(signal, dtype=float)
    mean_power = np.mean(x * x)
    if mean_power == 0.0:
        raise DomainError("PAPR undefined for an all-zero signal")
    return float(np.max(x * x) / mean_power)


def frame_to_csv(spectrum: np.ndarray, path) -> None:
    """Dump a frequency-domain frame as (bin, real, imag) rows for debugging."""
    spectrum = np.asarray(spectrum, dtype=complex)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "real", "imag"])
        for i, value in enumerate(spectrum):
            writer.writerow([i, f"{value.real:.9g}", f"{value.imag:.9g}"])
