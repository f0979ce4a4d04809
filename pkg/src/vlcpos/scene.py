"""Room, luminaire and receiver geometry.

Builds the 3-D scene used by the channel model: a rectangular room with up
to four ceiling-corner luminaires (VAPs), each carrying M co-located LED
emitters arranged as a pyramid of tilted normals around the luminaire axis,
plus a photodiode receiver pose.

Conventions: positions in meters, all orientation vectors are unit versors,
angles in radians unless a name says ``_deg``. The room origin is one floor
corner; z points up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

_UNIT_TOL = 1e-12


def unit(v: np.ndarray) -> np.ndarray:
    """Normalize ``v`` to unit length."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def is_versor(v: np.ndarray, tol: float = _UNIT_TOL) -> bool:
    return abs(np.linalg.norm(np.asarray(v, dtype=float)) - 1.0) <= tol


def _frozen(a: np.ndarray) -> np.ndarray:
    """Copy to a read-only float array so shared instances stay immutable."""
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LedTx:
    """One LED emitter: position [m], orientation versor, and its (vap, led) indices (1-based)."""

    position: np.ndarray
    normal: np.ndarray
    vap_index: int
    led_index: int

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position))
        object.__setattr__(self, "normal", _frozen(self.normal))
        if not is_versor(self.normal):
            raise ConfigError(f"LED normal is not a unit vector: {self.normal}")


@dataclass(frozen=True)
class ReceiverPose:
    """Photodiode pose and device constants.

    area_m2: active area [m^2]; fov_rad: half-angle field of view [rad];
    responsivity_a_per_w: [A/W]; capacitance_f_per_m2: junction capacitance
    per unit area [F/m^2].
    """

    position: np.ndarray
    normal: np.ndarray
    area_m2: float = 1e-4
    fov_rad: float = np.deg2rad(85.0)
    responsivity_a_per_w: float = 0.54
    capacitance_f_per_m2: float = 112e-12 * 1e4  # 112 pF/cm^2

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position))
        object.__setattr__(self, "normal", _frozen(self.normal))
        if not is_versor(self.normal):
            raise ConfigError(f"receiver normal is not a unit vector: {self.normal}")
        if not (0.0 < self.fov_rad <= np.pi / 2 + _UNIT_TOL):
            raise ConfigError(f"field of view must lie in (0, pi/2], got {self.fov_rad}")
        if self.area_m2 <= 0.0:
            raise ConfigError("photodiode area must be positive")
        if self.responsivity_a_per_w <= 0.0:
            raise ConfigError("responsivity must be positive")

    def with_position(self, position: np.ndarray) -> "ReceiverPose":
        """Same device and orientation at a different location."""
        return ReceiverPose(
            position=position,
            normal=self.normal,
            area_m2=self.area_m2,
            fov_rad=self.fov_rad,
            responsivity_a_per_w=self.responsivity_a_per_w,
            capacitance_f_per_m2=self.capacitance_f_per_m2,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative description of the scene (defaults: 5x4x3 m room, 4 corner VAPs x 4 LEDs).

    ``theta_wall_deg`` is the luminaire azimuth measured from each adjacent
    wall, ``theta_ceiling_deg`` the depression below the ceiling plane,
    ``alpha_deg`` the cone angle of each LED normal around the luminaire
    axis and ``psi0_deg`` the azimuthal phase of the first LED in that cone.
    """

    room_dims: tuple[float, float, float] = (5.0, 4.0, 3.0)
    vap_count: int = 4
    leds_per_vap: int = 4
    theta_wall_deg: float = 45.0
    theta_ceiling_deg: float = 35.0
    alpha_deg: float = 15.0
    psi0_deg: float = 0.0
    lambertian_mode: float = 10.0
    receiver_position: tuple[float, float, float] = (2.5, 2.0, 1.0)
    receiver_normal: tuple[float, float, float] = (0.0, 0.0, 1.0)
    area_cm2: float = 1.0
    fov_deg: float = 85.0
    responsivity_a_per_w: float = 0.54
    capacitance_pf_per_cm2: float = 112.0
    bias_current_a: float = 1.5
    upper_current_a: float = 1.0
    lower_current_a: float = -1.0


@dataclass(frozen=True)
class Scenario:
    """Immutable scene: room, ordered LED list, receiver pose and device constants.

    LEDs are ordered VAP-major: flat index = (k-1)*M + (m-1) for LED m of
    VAP k, matching the layout of observation vectors everywhere else.
    """

    room_dims: np.ndarray
    leds: tuple[LedTx, ...]
    receiver: ReceiverPose
    lambertian_mode: float
    bias_current_a: float
    upper_current_a: float
    lower_current_a: float
    theta_wall_rad: float
    theta_ceiling_rad: float
    alpha_rad: float
    vap_count: int
    leds_per_vap: int
    # stacked copies of the LED poses for vectorized channel evaluation
    led_positions: np.ndarray = field(repr=False, default=None)
    led_normals: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "room_dims", _frozen(self.room_dims))
        if len(self.leds) != self.vap_count * self.leds_per_vap:
            raise ConfigError(
                f"expected {self.vap_count * self.leds_per_vap} LEDs, got {len(self.leds)}"
            )
        if self.lower_current_a >= self.upper_current_a:
            raise ConfigError("lower modulation limit must be below the upper limit")
        if self.lambertian_mode < 1.0:
            raise ConfigError("Lambertian mode number must be >= 1")
        object.__setattr__(
            self, "led_positions", _frozen(np.stack([led.position for led in self.leds]))
        )
        object.__setattr__(
            self, "led_normals", _frozen(np.stack([led.normal for led in self.leds]))
        )

    @property
    def num_vaps(self) -> int:
        return self.vap_count

    @property
    def num_leds_per_vap(self) -> int:
        return self.leds_per_vap

    @property
    def num_leds(self) -> int:
        return len(self.leds)

    def led(self, m: int, k: int) -> LedTx:
        """LED ``m`` of VAP ``k`` (both 1-based)."""
        return self.leds[(k - 1) * self.leds_per_vap + (m - 1)]

    def centroid(self) -> np.ndarray:
        return self.room_dims / 2.0


def vap_corners(room_dims: Sequence[float], count: int) -> np.ndarray:
    """Upper-corner mount points, ordered (0,0), (Lx,0), (Lx,Ly), (0,Ly)."""
    lx, ly, lz = (float(d) for d in room_dims)
    corners = np.array(
        [[0.0, 0.0, lz], [lx, 0.0, lz], [lx, ly, lz], [0.0, ly, lz]]
    )
    if not 1 <= count <= 4:
        raise ConfigError(f"corner layout supports 1..4 VAPs, got {count}")
    return corners[:count]


def vap_axis(corner_index: int, theta_wall: float, theta_ceiling: float) -> np.ndarray:
    """Luminaire axis versor for the given corner (0-based index in corner order).

    The axis points into the room at azimuth ``theta_wall`` from each
    adjacent wall and dips ``theta_ceiling`` below the ceiling plane.
    """
    azimuths = (
        theta_wall,
        np.pi - theta_wall,
        np.pi + theta_wall,
        2.0 * np.pi - theta_wall,
    )
    az = azimuths[corner_index]
    ct, st = np.cos(theta_ceiling), np.sin(theta_ceiling)
    return np.array([ct * np.cos(az), ct * np.sin(az), -st])


def _axis_basis(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal basis {u, w} of the plane normal to ``axis``."""
    z = np.array([0.0, 0.0, 1.0])
    u = np.cross(z, axis)
    norm = np.linalg.norm(u)
    if norm < 1e-9:  # axis (anti)parallel to z: straight-down luminaire
        u = np.array([1.0, 0.0, 0.0])
    else:
        u = u / norm
    w = np.cross(axis, u)
    return u, w


def led_normals_for_vap(axis: np.ndarray, leds_per_vap: int, alpha: float, psi0: float) -> np.ndarray:
    """Pyramid of ``leds_per_vap`` unit normals tilted ``alpha`` off the luminaire axis."""
    u, w = _axis_basis(axis)
    ca, sa = np.cos(alpha), np.sin(alpha)
    psis = psi0 + 2.0 * np.pi * np.arange(leds_per_vap) / leds_per_vap
    normals = ca * axis[None, :] + sa * (
        np.cos(psis)[:, None] * u[None, :] + np.sin(psis)[:, None] * w[None, :]
    )
    return normals


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Construct the scene described by ``config``.

    A pure function: identical configurations produce identical scenarios.
    """
    lx, ly, lz = config.room_dims
    if min(lx, ly, lz) <= 0.0:
        raise ConfigError(f"room dimensions must be positive, got {config.room_dims}")
    if config.vap_count < 1 or config.leds_per_vap < 1:
        raise ConfigError("need at least one VAP and one LED per VAP")

    theta_wall = np.deg2rad(config.theta_wall_deg)
    theta_ceiling = np.deg2rad(config.theta_ceiling_deg)
    alpha = np.deg2rad(config.alpha_deg)
    psi0 = np.deg2rad(config.psi0_deg)
    if not (0.0 <= theta_ceiling <= np.pi / 2):
        raise ConfigError("ceiling depression angle must lie in [0, 90] degrees")
    if not (0.0 <= alpha < np.pi / 2):
        raise ConfigError("LED cone angle must lie in [0, 90) degrees")

    corners = vap_corners(config.room_dims, config.vap_count)
    leds: list[LedTx] = []
    for k0, corner in enumerate(corners):
        axis = vap_axis(k0, theta_wall, theta_ceiling)
        normals = led_normals_for_vap(axis, config.leds_per_vap, alpha, psi0)
        for m0, normal in enumerate(normals):
            norm = np.linalg.norm(normal)
            # construction must yield versors; anything else is an internal bug
            assert abs(norm - 1.0) < 1e-9, f"non-unit LED normal (|n|={norm})"
            leds.append(
                LedTx(
                    position=corner,
                    normal=normal / norm,
                    vap_index=k0 + 1,
                    led_index=m0 + 1,
                )
            )

    receiver = ReceiverPose(
        position=np.asarray(config.receiver_position, dtype=float),
        normal=unit(np.asarray(config.receiver_normal, dtype=float)),
        area_m2=config.area_cm2 * 1e-4,
        fov_rad=np.deg2rad(config.fov_deg),
        responsivity_a_per_w=config.responsivity_a_per_w,
        capacitance_f_per_m2=config.capacitance_pf_per_cm2 * 1e-12 * 1e4,
    )

    return Scenario(
        room_dims=np.asarray(config.room_dims, dtype=float),
        leds=tuple(leds),
        receiver=receiver,
        lambertian_mode=float(config.lambertian_mode),
        bias_current_a=float(config.bias_current_a),
        upper_current_a=float(config.upper_current_a),
        lower_current_a=float(config.lower_current_a),
        theta_wall_rad=theta_wall,
        theta_ceiling_rad=theta_ceiling,
        alpha_rad=alpha,
        vap_count=config.vap_count,
        leds_per_vap=config.leds_per_vap,
    )


def incidence_vector(led: LedTx, receiver: ReceiverPose) -> np.ndarray:
    """Vector from the LED to the receiver: r_R - r_led [m]."""
    return receiver.position - led.position
