"""Experiment configuration: INI file schema, defaults and validation.

One file drives everything. Sections and keys mirror the physical setup:

  [room] [vap] [led] [receiver] [noise]  -> scene + device models
  [ofdm]                                 -> frame geometry and clipping factor
  [estimator]                            -> step size, tolerance, start policy
  [experiment]                           -> realization counts, grids, sweeps

Missing keys fall back to the documented defaults (the published operating
point); unknown sections or keys are configuration errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..frontend import LedModel, NoiseModel
from ..ofdm import OfdmConfig
from ..scene import Scenario, ScenarioConfig, build_scenario

DEFAULT_PROBES = ((1.25, 1.0, 1.0), (1.25, 2.0, 1.0), (2.5, 1.0, 1.0))
DEFAULT_PLANES = (0.1, 0.8, 2.0)


@dataclass(frozen=True)
class EstimatorParams:
    eta: float = 0.3
    epsilon_m: float = 1e-5
    i_max: int = 200
    start: str = "waoa"

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("estimator step size must lie in (0, 1]")
        if self.epsilon_m <= 0.0 or self.i_max < 1:
            raise ConfigError("estimator tolerance and iteration cap must be positive")
        if self.start not in ("waoa", "centroid", "random"):
            raise ConfigError(f"unknown start policy {self.start!r}")


@dataclass(frozen=True)
class ExperimentParams:
    realizations: int = 1000
    base_seed: int = 20240901
    threads: int = 1
    mode: str = "both"  # lom | lcm | both
    pitch_m: float = 0.25
    plane_heights_m: tuple[float, ...] = DEFAULT_PLANES
    z_max_m: float = 3.0
    probe_positions: tuple[tuple[float, float, float], ...] = DEFAULT_PROBES
    surface_iterations: int = 30
    noise_min_a2: float = 1e-20
    noise_max_a2: float = 1e-8
    noise_points: int = 13
    noise_fit_min_a2: float = 1e-16
    noise_fit_max_a2: float = 1e-12
    gamma_min: float = 1.0
    gamma_max: float = 14.0
    gamma_points: int = 27
    transmit_power_w: float | None = None

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError("realization count must be >= 1")
        if self.threads < 1:
            raise ConfigError("thread count must be >= 1")
        if self.mode not in ("lom", "lcm", "both"):
            raise ConfigError(f"mode must be lom, lcm or both, got {self.mode!r}")
        if self.pitch_m <= 0.0:
            raise ConfigError("grid pitch must be positive")
        if self.noise_min_a2 >= self.noise_max_a2 or self.gamma_min >= self.gamma_max:
            raise ConfigError("sweep bounds must be ordered")
        if self.noise_points < 2 or self.gamma_points < 2:
            raise ConfigError("sweeps need at least two points")


@dataclass(frozen=True)
class SimConfig:
    """Everything an experiment needs, assembled from one INI file."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    led: LedModel = field(default_factory=LedModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    ofdm_size: int = 1024
    gamma: float = 7.4
    cp_len: int | None = None
    data_bins_override: int | None = None
    estimator: EstimatorParams = field(default_factory=EstimatorParams)
    experiment: ExperimentParams = field(default_factory=ExperimentParams)

    def build_scenario(self) -> Scenario:
        return build_scenario(self.scenario)

    def ofdm_config(self, mode: str) -> OfdmConfig:
        return OfdmConfig(
            size=self.ofdm_size,
            leds_per_vap=self.scenario.leds_per_vap,
            vap_count=self.scenario.vap_count,
            mode=mode,
            gamma=self.gamma,
            upper_current_a=self.scenario.upper_current_a,
            lower_current_a=self.scenario.lower_current_a,
            bandwidth_hz=self.noise.bandwidth_hz,
            cp_len=self.cp_len,
            data_bins_override=self.data_bins_override,
        )

    def transmit_power_w(self) -> float:
        """Per-LED optical power: configured, or the radiated power at bias."""
        if self.experiment.transmit_power_w is not None:
            return self.experiment.transmit_power_w
        from ..frontend import luminous_flux

        return self.led.radiometric_w_per_lm * luminous_flux(
            self.led.bias_current_a, self.led
        )

    def modes(self) -> tuple[str, ...]:
        return ("lom", "lcm") if self.experiment.mode == "both" else (self.experiment.mode,)


# --- INI schema ------------------------------------------------------------

_SCHEMA: dict[str, tuple[str, ...]] = {
    "room": ("lx", "ly", "lz"),
    "vap": ("count", "theta_wall_deg", "theta_ceiling_deg", "alpha_deg", "psi0_deg"),
    "led": (
        "count_per_vap",
        "lambertian_mode",
        "bias_current_a",
        "upper_current_a",
        "lower_current_a",
        "flux_c2",
        "flux_c1",
        "flux_c0",
        "radiometric_w_per_lm",
    ),
    "receiver": (
        "x",
        "y",
        "z",
        "nx",
        "ny",
        "nz",
        "area_cm2",
        "fov_deg",
        "responsivity_a_per_w",
        "capacitance_pf_per_cm2",
    ),
    "noise": (
        "temperature_k",
        "open_loop_gain",
        "transconductance_ms",
        "fet_noise_factor",
        "bandwidth_factor_i2",
        "noise_factor_i3",
        "bandwidth_mhz",
        "optical_filter_bandwidth_nm",
        "background_irradiance_uw_cm2_nm",
        "dark_current_pa",
    ),
    "ofdm": ("size", "gamma", "cp_len", "data_bins_override", "n_d"),
    "estimator": ("eta", "epsilon_m", "i_max", "start"),
    "experiment": (
        "realizations",
        "base_seed",
        "threads",
        "mode",
        "pitch_m",
        "plane_heights_m",
        "z_max_m",
        "probe_positions",
        "surface_iterations",
        "noise_min_a2",
        "noise_max_a2",
        "noise_points",
        "noise_fit_min_a2",
        "noise_fit_max_a2",
        "gamma_min",
        "gamma_max",
        "gamma_points",
        "transmit_power_w",
    ),
}


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _parse_positions(text: str) -> tuple[tuple[float, float, float], ...]:
    out = []
    for chunk in text.split(";"):
        vals = _parse_floats(chunk)
        if len(vals) != 3:
            raise ConfigError(f"positions need 3 coordinates each, got {chunk!r}")
        out.append(tuple(vals))
    return tuple(out)


def load_config(path: str | Path) -> SimConfig:
    """Read and validate an INI experiment configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {path}")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}] of {path}")

    def get(section: str, key: str, conv, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return conv(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
        return default

    scen_d = ScenarioConfig()
    scenario = ScenarioConfig(
        room_dims=(
            get("room", "lx", float, scen_d.room_dims[0]),
            get("room", "ly", float, scen_d.room_dims[1]),
            get("room", "lz", float, scen_d.room_dims[2]),
        ),
        vap_count=get("vap", "count", int, scen_d.vap_count),
        leds_per_vap=get("led", "count_per_vap", int, scen_d.leds_per_vap),
        theta_wall_deg=get("vap", "theta_wall_deg", float, scen_d.theta_wall_deg),
        theta_ceiling_deg=get("vap", "theta_ceiling_deg", float, scen_d.theta_ceiling_deg),
        alpha_deg=get("vap", "alpha_deg", float, scen_d.alpha_deg),
        psi0_deg=get("vap", "psi0_deg", float, scen_d.psi0_deg),
        lambertian_mode=get("led", "lambertian_mode", float, scen_d.lambertian_mode),
        receiver_position=(
            get("receiver", "x", float, scen_d.receiver_position[0]),
            get("receiver", "y", float, scen_d.receiver_position[1]),
            get("receiver", "z", float, scen_d.receiver_position[2]),
        ),
        receiver_normal=(
            get("receiver", "nx", float, scen_d.receiver_normal[0]),
            get("receiver", "ny", float, scen_d.receiver_normal[1]),
            get("receiver", "nz", float, scen_d.receiver_normal[2]),
        ),
        area_cm2=get("receiver", "area_cm2", float, scen_d.area_cm2),
        fov_deg=get("receiver", "fov_deg", float, scen_d.fov_deg),
        responsivity_a_per_w=get(
            "receiver", "responsivity_a_per_w", float, scen_d.responsivity_a_per_w
        ),
        capacitance_pf_per_cm2=get(
            "receiver", "capacitance_pf_per_cm2", float, scen_d.capacitance_pf_per_cm2
        ),
        bias_current_a=get("led", "bias_current_a", float, scen_d.bias_current_a),
        upper_current_a=get("led", "upper_current_a", float, scen_d.upper_current_a),
        lower_current_a=get("led", "lower_current_a", float, scen_d.lower_current_a),
    )

    led_d = LedModel()
    led = LedModel(
        flux_c2=get("led", "flux_c2", float, led_d.flux_c2),
        flux_c1=get("led", "flux_c1", float, led_d.flux_c1),
        flux_c0=get("led", "flux_c0", float, led_d.flux_c0),
        radiometric_w_per_lm=get(
            "led", "radiometric_w_per_lm", float, led_d.radiometric_w_per_lm
        ),
        upper_current_a=scenario.upper_current_a,
        lower_current_a=scenario.lower_current_a,
        bias_current_a=scenario.bias_current_a,
    )

    noise_d = NoiseModel()
    noise = NoiseModel(
        temperature_k=get("noise", "temperature_k", float, noise_d.temperature_k),
        open_loop_gain=get("noise", "open_loop_gain", float, noise_d.open_loop_gain),
        transconductance_s=get(
            "noise", "transconductance_ms", lambda v: float(v) * 1e-3, noise_d.transconductance_s
        ),
        fet_noise_factor=get("noise", "fet_noise_factor", float, noise_d.fet_noise_factor),
        bandwidth_factor_i2=get(
            "noise", "bandwidth_factor_i2", float, noise_d.bandwidth_factor_i2
        ),
        noise_factor_i3=get("noise", "noise_factor_i3", float, noise_d.noise_factor_i3),
        bandwidth_hz=get("noise", "bandwidth_mhz", lambda v: float(v) * 1e6, noise_d.bandwidth_hz),
        optical_filter_bandwidth_nm=get(
            "noise", "optical_filter_bandwidth_nm", float, noise_d.optical_filter_bandwidth_nm
        ),
        background_irradiance_w_cm2_nm=get(
            "noise",
            "background_irradiance_uw_cm2_nm",
            lambda v: float(v) * 1e-6,
            noise_d.background_irradiance_w_cm2_nm,
        ),
        dark_current_a=get(
            "noise", "dark_current_pa", lambda v: float(v) * 1e-12, noise_d.dark_current_a
        ),
    )

    # n_d is an alias for data_bins_override (published table lists N_D directly)
    override = get("ofdm", "data_bins_override", int, None)
    if override is None:
        override = get("ofdm", "n_d", int, None)

    estimator = EstimatorParams(
        eta=get("estimator", "eta", float, 0.3),
        epsilon_m=get("estimator", "epsilon_m", float, 1e-5),
        i_max=get("estimator", "i_max", int, 200),
        start=get("estimator", "start", str, "waoa"),
    )

    exp_d = ExperimentParams()
    experiment = ExperimentParams(
        realizations=get("experiment", "realizations", int, exp_d.realizations),
        base_seed=get("experiment", "base_seed", int, exp_d.base_seed),
        threads=get("experiment", "threads", int, exp_d.threads),
        mode=get("experiment", "mode", str, exp_d.mode),
        pitch_m=get("experiment", "pitch_m", float, exp_d.pitch_m),
        plane_heights_m=get(
            "experiment", "plane_heights_m", _parse_floats, exp_d.plane_heights_m
        ),
        z_max_m=get("experiment", "z_max_m", float, exp_d.z_max_m),
        probe_positions=get(
            "experiment", "probe_positions", _parse_positions, exp_d.probe_positions
        ),
        surface_iterations=get(
            "experiment", "surface_iterations", int, exp_d.surface_iterations
        ),
        noise_min_a2=get("experiment", "noise_min_a2", float, exp_d.noise_min_a2),
        noise_max_a2=get("experiment", "noise_max_a2", float, exp_d.noise_max_a2),
        noise_points=get("experiment", "noise_points", int, exp_d.noise_points),
        noise_fit_min_a2=get("experiment", "noise_fit_min_a2", float, exp_d.noise_fit_min_a2),
        noise_fit_max_a2=get("experiment", "noise_fit_max_a2", float, exp_d.noise_fit_max_a2),
        gamma_min=get("experiment", "gamma_min", float, exp_d.gamma_min),
        gamma_max=get("experiment", "gamma_max", float, exp_d.gamma_max),
        gamma_points=get("experiment", "gamma_points", int, exp_d.gamma_points),
        transmit_power_w=get("experiment", "transmit_power_w", float, exp_d.transmit_power_w),
    )

    return SimConfig(
        scenario=scenario,
        led=led,
        noise=noise,
        ofdm_size=get("ofdm", "size", int, 1024),
        gamma=get("ofdm", "gamma", float, 7.4),
        cp_len=get("ofdm", "cp_len", int, None),
        data_bins_override=override,
        estimator=estimator,
        experiment=experiment,
    )


def default_config() -> SimConfig:
    """The published operating point, no file required."""
    return SimConfig()


def realization_seed(base_seed: int, realization: int) -> np.random.SeedSequence:
    """Independent, order-free child seed for one realization."""
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(realization,))


def realization_rng(base_seed: int, realization: int) -> np.random.Generator:
    return np.random.default_rng(realization_seed(base_seed, realization))
