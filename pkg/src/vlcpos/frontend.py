"""LED electro-optics and receiver noise front end.

Covers the quadratic luminous-flux curve of the emitter, the radiometric
conversion and predistortion that linearize it, the photodiode noise budget
(shot + transimpedance-amplifier thermal terms) and the synthesis of noisy
normalized RSS observation vectors for the estimators.

Unit conventions follow the device datasheets: flux in lumen, currents in
ampere, noise variances in A^2. The background shot-noise term uses the
photodiode area in cm^2 and the irradiance in W/(cm^2 nm); stored SI values
are converted internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .channel import GainMatrix
from .errors import ConfigError, DomainError
from .scene import ReceiverPose

Q_ELECTRON = constants.elementary_charge  # [C]
K_BOLTZMANN = constants.Boltzmann  # [J/K]


@dataclass(frozen=True)
class LedModel:
    """Emitter model: quadratic flux curve, radiometric factor and drive limits.

    flux(I) = c2*I^2 + c1*I + c0 [lm]; defaults fit a phosphor-coated
    high-power white LED. ``radiometric_w_per_lm`` converts flux to radiated
    optical power. Modulation swings within [lower_current_a,
    upper_current_a] around ``bias_current_a``.
    """

    flux_c2: float = -31.29  # [lm/A^2]
    flux_c1: float = 705.35  # [lm/A]
    flux_c0: float = 20.7  # [lm]
    radiometric_w_per_lm: float = 2.1e-3
    upper_current_a: float = 1.0
    lower_current_a: float = -1.0
    bias_current_a: float = 1.5

    def __post_init__(self):
        if self.upper_current_a <= self.lower_current_a:
            raise ConfigError("upper modulation limit must exceed the lower limit")
        # predistortion needs a strictly increasing flux over the drive range
        for edge in (self.bias_current_a + self.lower_current_a,
                     self.bias_current_a + self.upper_current_a):
            if 2.0 * self.flux_c2 * edge + self.flux_c1 <= 0.0:
                raise ConfigError(
                    f"flux curve is not increasing at drive current {edge} A"
                )


@dataclass(frozen=True)
class NoiseModel:
    """Receiver noise parameters for a PIN photodiode with FET transimpedance amp."""

    temperature_k: float = 300.0
    open_loop_gain: float = 10.0
    transconductance_s: float = 30.0 * 1e-3  # 30 mS
    fet_noise_factor: float = 1.5
    bandwidth_factor_i2: float = 0.562
    noise_factor_i3: float = 0.0868
    bandwidth_hz: float = 10.0 * 1e6  # 10 MHz
    optical_filter_bandwidth_nm: float = 400.0
    background_irradiance_w_cm2_nm: float = 5.8 * 1e-6  # 5.8 uW/(cm^2 nm)
    dark_current_a: float = 5.0 * 1e-12  # 5 pA

    def __post_init__(self):
        for name in (
            "temperature_k",
            "open_loop_gain",
            "transconductance_s",
            "fet_noise_factor",
            "bandwidth_factor_i2",
            "noise_factor_i3",
            "bandwidth_hz",
            "optical_filter_bandwidth_nm",
            "background_irradiance_w_cm2_nm",
            "dark_current_a",
        ):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"noise parameter {name} must be positive")


@dataclass(frozen=True)
class NoiseVariances:
    """Photocurrent noise budget [A^2].

    ``thermal`` is the sum of the feedback-resistor and FET-channel terms,
    which are also exposed separately; ``total`` adds all shot terms to it.
    """

    background: float
    received_signal: float
    dark_current: float
    thermal_feedback: float
    thermal_fet: float

    @property
    def thermal(self) -> float:
        return self.thermal_feedback + self.thermal_fet

    @property
    def total(self) -> float:
        return self.background + self.received_signal + self.dark_current + self.thermal


def luminous_flux(current_a, model: LedModel = LedModel()):
    """Luminous flux of the emitter at drive current ``current_a`` [lm]."""
    i = np.asarray(current_a, dtype=float)
    out = model.flux_c2 * i**2 + model.flux_c1 * i + model.flux_c0
    return float(out) if out.ndim == 0 else out


def led_conversion_factor(model: LedModel) -> float:
    """Secant slope of radiated power vs modulation current over the drive range [W/A]."""
    span = model.upper_current_a - model.lower_current_a
    if span == 0.0:
        raise DomainError("modulation limits coincide; conversion factor undefined")
    return (
        model.radiometric_w_per_lm
        * (luminous_flux(model.upper_current_a, model) - luminous_flux(model.lower_current_a, model))
        / span
    )


def predistort(x, model: LedModel = LedModel()):
    """Drive current that makes the optical output linear in ``x``.

    Solves flux(I) = flux(bias) + slope * x on the increasing branch of the
    quadratic flux curve (closed form), where slope is the secant slope used
    by :func:`led_conversion_factor`. ``x`` must already be clipped to
    [lower_current_a, upper_current_a]; values outside raise.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < model.lower_current_a - 1e-12) or np.any(x > model.upper_current_a + 1e-12):
        raise DomainError("predistortion input outside the clip range")
    slope = (
        luminous_flux(model.upper_current_a, model) - luminous_flux(model.lower_current_a, model)
    ) / (model.upper_current_a - model.lower_current_a)
    target = luminous_flux(model.bias_current_a, model) + slope * x
    c2, c1, c0 = model.flux_c2, model.flux_c1, model.flux_c0
    if c2 == 0.0:
        drive = (target - c0) / c1
    else:
        disc = c1 * c1 - 4.0 * c2 * (c0 - target)
        if np.any(disc < 0.0):
            raise DomainError("requested flux outside the reachable range of the LED")
        # (-c1 + sqrt(disc)) / (2 c2) lands on the increasing branch for either sign of c2
        drive = (-c1 + np.sqrt(disc)) / (2.0 * c2)
    return float(drive) if drive.ndim == 0 else drive


def noise_variances(nm: NoiseModel, rp: ReceiverPose, received_power_w: float) -> NoiseVariances:
    """Shot and thermal photocurrent noise variances for the given optical load."""
    if received_power_w < 0.0:
        raise DomainError("received optical power must be non-negative")
    area_cm2 = rp.area_m2 * 1e4
    r_pd = rp.responsivity_a_per_w
    b = nm.bandwidth_hz

    background = (
        2.0 * Q_ELECTRON * r_pd * area_cm2 * nm.background_irradiance_w_cm2_nm
        * nm.optical_filter_bandwidth_nm * b
    )
    received_signal = 2.0 * Q_ELECTRON * r_pd * received_power_w * b
    dark_current = 2.0 * Q_ELECTRON * nm.dark_current_a * b

    capacitance_f = rp.capacitance_f_per_m2 * rp.area_m2  # total junction capacitance
    thermal_feedback = (
        8.0 * np.pi * K_BOLTZMANN * nm.temperature_k / nm.open_loop_gain
        * capacitance_f * nm.bandwidth_factor_i2 * b**2
    )
    thermal_fet = (
        16.0 * np.pi**2 * K_BOLTZMANN * nm.temperature_k * nm.fet_noise_factor
        / nm.transconductance_s * capacitance_f**2 * nm.noise_factor_i3 * b**3
    )
    return NoiseVariances(
        background=background,
        received_signal=received_signal,
        dark_current=dark_current,
        thermal_feedback=thermal_feedback,
        thermal_fet=thermal_fet,
    )


def normalized_noise_std(
    noise_std_a: float,
    h_gain: float,
    scaling_factor: float,
    responsivity_a_per_w: float,
    conversion_w_per_a: float,
) -> float:
    """Convert a photocurrent noise std [A] to the normalized gain domain.

    The receiver divides each pilot magnitude by H * C_F * R_pd * S_led so
    that the noise-free observation equals the DC optical gain; the same
    divisor maps the noise std.
    """
    denom = h_gain * scaling_factor * responsivity_a_per_w * conversion_w_per_a
    if denom <= 0.0:
        raise ConfigError("normalization constants must be positive")
    return noise_std_a / denom


@dataclass(frozen=True)
class ObservationVector:
    """Normalized per-LED RSS samples, VAP-major: element (k-1)*M + (m-1).

    Values live in the same unitless domain as the DC optical gains.
    Negative samples are possible under noise and are passed through.
    """

    values: np.ndarray
    leds_per_vap: int
    vap_count: int

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.leds_per_vap * self.vap_count,):
            raise ConfigError(
                f"observation length {vals.shape} does not match "
                f"{self.leds_per_vap}x{self.vap_count} links"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def index(self, m: int, k: int) -> int:
        """Flat index of LED ``m`` in VAP ``k`` (1-based)."""
        return (k - 1) * self.leds_per_vap + (m - 1)

    def as_matrix(self) -> np.ndarray:
        """(M, K) view matching the gain-matrix layout."""
        return self.values.reshape(self.vap_count, self.leds_per_vap).T

    def __array__(self, dtype=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self) -> int:
        return self.values.size


def synthesize_observation(
    gm: GainMatrix,
    sigma_omega: float,
    rng: np.random.Generator,
    mode: str = "gaussian",
) -> ObservationVector:
    """Noisy observation vector for the true gains ``gm``.

    mode "gaussian" (default): additive N(0, sigma_omega^2) on each gain.
    mode "rician": circular complex Gaussian of total variance
    sigma_omega^2 added to the underlying bin before taking the magnitude;
    for sensitivity studies only.
    """
    if sigma_omega < 0.0:
        raise DomainError("noise std must be non-negative")
    clean = gm.vector
    if sigma_omega == 0.0:
        values = clean.copy()
    elif mode == "gaussian":
        values = clean + rng.normal(0.0, sigma_omega, size=clean.shape)
    elif mode == "rician":
        re = clean + rng.normal(0.0, sigma_omega / np.sqrt(2.0), size=clean.shape)
        im = rng.normal(0.0, sigma_omega / np.sqrt(2.0), size=clean.shape)
        values = np.hypot(re, im)
    else:
        raise ConfigError(f"unknown noise mode {mode!r}")
    return ObservationVector(
        values=values, leds_per_vap=gm.num_leds_per_vap, vap_count=gm.num_vaps
    )
