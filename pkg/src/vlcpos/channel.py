"""Lambertian line-of-sight optical channel.

DC gain between one LED and the photodiode:

    gain = kappa * gate_fov * gate_emission * f(v)
    kappa = -(n_L + 1) * A_pd / (2*pi)
    f(v)  = (v . n_led)^n_L * (v . n_pd) / ||v||^(n_L + 3)

with v the LED-to-receiver vector. Both angular gates are rectangular:
the incidence angle (between -v and the photodiode normal, i.e.
cos(theta) = -(v . n_pd)/||v||) must not exceed the field of view, and the
emission angle (cos(phi) = (v . n_led)/||v||) must not exceed 90 degrees.
Boundary angles pass. kappa is negative and cancels the negative
(v . n_pd) factor, so a passing gate always yields a non-negative gain.

The module also provides the closed-form gradient of the received power
with respect to the receiver position, used by the Gauss-Newton RSS
refiner. All entry points broadcast over trailing position axes so that
large Monte Carlo batches evaluate in single numpy calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .scene import LedTx, ReceiverPose, Scenario, incidence_vector


@dataclass(frozen=True)
class GainMatrix:
    """DC optical gains of all M*K links, as an (M, K) matrix.

    ``vector`` flattens the matrix to the canonical observation layout:
    element (k-1)*M + (m-1) holds the gain of LED m in VAP k.
    """

    values: np.ndarray  # shape (M, K)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def num_leds_per_vap(self) -> int:
        return self.values.shape[0]

    @property
    def num_vaps(self) -> int:
        return self.values.shape[1]

    @property
    def vector(self) -> np.ndarray:
        """Flattened gains, VAP-major: index = (k-1)*M + (m-1)."""
        return self.values.T.reshape(-1)


def _gain_terms(
    positions: np.ndarray,
    led_positions: np.ndarray,
    led_normals: np.ndarray,
    receiver_normal: np.ndarray,
    fov_rad: float,
    n_l: float,
):
    """Shared geometry terms for gains and gradients.

    positions: (..., 3) receiver locations; led arrays: (L, 3).
    Returns v (..., L, 3), r, dot_led, dot_pd, gate with shapes (..., L).
    """
    positions = np.asarray(positions, dtype=float)
    v = positions[..., None, :] - led_positions  # (..., L, 3)
    r2 = np.einsum("...i,...i->...", v, v)
    if np.any(r2 == 0.0):
        raise DomainError("receiver coincides with an LED: channel gain undefined")
    r = np.sqrt(r2)
    dot_led = np.einsum("...li,li->...l", v, led_normals)  # v . n_led
    dot_pd = v @ receiver_normal  # v . n_pd
    cos_phi = dot_led / r
    cos_theta = -dot_pd / r
    # rectangular gates; "<=" at the boundary passes, hence ">=" on cosines
    gate = (cos_theta >= np.cos(fov_rad)) & (cos_phi >= 0.0)
    return v, r, dot_led, dot_pd, gate


def _gain_from_terms(r, dot_led, dot_pd, gate, kappa, n_l):
    base = np.where(gate, dot_led, 1.0)  # avoid fractional powers of negatives
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        f = base**n_l * dot_pd / r ** (n_l + 3.0)
        out = np.where(gate, kappa * f, 0.0)
    # extreme ranges overflow the power terms; the true gain underflows to 0 there
    return np.where(np.isfinite(out), out, 0.0)


def lambertian_kappa(n_l: float, area_m2: float) -> float:
    return -(n_l + 1.0) * area_m2 / (2.0 * np.pi)


def channel_gain(led: LedTx, receiver: ReceiverPose, n_l: float) -> float:
    """DC optical gain of a single LED-to-photodiode link (unitless)."""
    kappa = lambertian_kappa(n_l, receiver.area_m2)
    _, r, dot_led, dot_pd, gate = _gain_terms(
        receiver.position,
        led.position[None, :],
        led.normal[None, :],
        receiver.normal,
        receiver.fov_rad,
        n_l,
    )
    return float(_gain_from_terms(r, dot_led, dot_pd, gate, kappa, n_l)[0])


def gain_vector(scenario: Scenario, positions: np.ndarray) -> np.ndarray:
    """Gains of all links for receiver position(s), shape (..., M*K).

    This is the noise-free observation map evaluated at candidate
    positions; the receiver orientation and device constants stay fixed.
    """
    rx = scenario.receiver
    kappa = lambertian_kappa(scenario.lambertian_mode, rx.area_m2)
    _, r, dot_led, dot_pd, gate = _gain_terms(
        positions,
        scenario.led_positions,
        scenario.led_normals,
        rx.normal,
        rx.fov_rad,
        scenario.lambertian_mode,
    )
    return _gain_from_terms(r, dot_led, dot_pd, gate, kappa, scenario.lambertian_mode)


def gain_matrix(scenario: Scenario, position: np.ndarray | None = None) -> GainMatrix:
    """Evaluate all M*K gains at the scenario receiver (or an override position)."""
    pos = scenario.receiver.position if position is None else np.asarray(position, float)
    vec = gain_vector(scenario, pos)  # VAP-major layout
    m, k = scenario.leds_per_vap, scenario.vap_count
    return GainMatrix(values=vec.reshape(k, m).T)


def received_power(gain: float, transmit_power_w: float) -> float:
    """Optical power collected from one LED: gain * P_T [W]."""
    if transmit_power_w < 0.0:
        raise DomainError("transmit power must be non-negative")
    return gain * transmit_power_w


def total_received_power(gm: GainMatrix, transmit_power_w: float) -> float:
    """Total optical power over all links [W]."""
    if transmit_power_w < 0.0:
        raise DomainError("transmit power must be non-negative")
    return float(gm.values.sum() * transmit_power_w)


def electric_gain(gain: float, led_conversion_w_per_a: float, responsivity_a_per_w: float) -> float:
    """Modulation-current to photocurrent gain: S_led * gain * R_pd [A/A]."""
    if led_conversion_w_per_a <= 0.0 or responsivity_a_per_w <= 0.0:
        raise DomainError("conversion factor and responsivity must be positive")
    return led_conversion_w_per_a * gain * responsivity_a_per_w


def jacobian(scenario: Scenario, positions: np.ndarray, transmit_power_w: float = 1.0) -> np.ndarray:
    """Gradient of every link's received power w.r.t. receiver position.

    Returns shape (..., M*K, 3); row (k-1)*M + (m-1) holds
    (dP/dx, dP/dy, dP/dz) of LED m in VAP k. The gates are treated as
    constants, so rows vanish identically outside the gated region and the
    discontinuity at a gate boundary is left as-is.
    """
    rx = scenario.receiver
    n_l = scenario.lambertian_mode
    kappa = lambertian_kappa(n_l, rx.area_m2)
    v, r, dot_led, dot_pd, gate = _gain_terms(
        positions,
        scenario.led_positions,
        scenario.led_normals,
        rx.normal,
        rx.fov_rad,
        n_l,
    )
    base = np.where(gate, dot_led, 1.0)
    # grad f = n_L d_led^(n_L-1) d_pd / r^(n_L+3) * n_led
    #        +     d_led^n_L           / r^(n_L+3) * n_pd
    #        - (n_L+3) d_led^n_L d_pd  / r^(n_L+5) * v
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        r_pow = r ** (n_l + 3.0)
        c_led = n_l * base ** (n_l - 1.0) * dot_pd / r_pow
        c_pd = base**n_l / r_pow
        c_v = (n_l + 3.0) * base**n_l * dot_pd / (r_pow * r * r)
        grad = (
            c_led[..., None] * scenario.led_normals
            + c_pd[..., None] * rx.normal
            - c_v[..., None] * v
        )
        rows = kappa * transmit_power_w * grad
        rows = np.where(gate[..., None], rows, 0.0)
    # see _gain_from_terms: overflow at extreme ranges stands in for an underflowed 0
    return np.where(np.isfinite(rows), rows, 0.0)


def jacobian_row(
    led: LedTx, receiver: ReceiverPose, n_l: float, transmit_power_w: float = 1.0
) -> np.ndarray:
    """(dP/dx, dP/dy, dP/dz) of one link at the receiver position, shape (3,)."""
    kappa = lambertian_kappa(n_l, receiver.area_m2)
    v = incidence_vector(led, receiver)
    r2 = float(v @ v)
    if r2 == 0.0:
        raise DomainError("receiver coincides with the LED: gradient undefined")
    r = np.sqrt(r2)
    dot_led = float(v @ led.normal)
    dot_pd = float(v @ receiver.normal)
    if (-dot_pd / r) < np.cos(receiver.fov_rad) or dot_led < 0.0:
        return np.zeros(3)
    r_pow = r ** (n_l + 3.0)
    grad = (
        n_l * dot_led ** (n_l - 1.0) * dot_pd / r_pow * led.normal
        + dot_led**n_l / r_pow * receiver.normal
        - (n_l + 3.0) * dot_led**n_l * dot_pd / (r_pow * r2) * v
    )
    return kappa * transmit_power_w * grad
