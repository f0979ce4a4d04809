"""Normalized-observation model shared by the Monte Carlo experiments.

For a receiver position the noise-free observation is the gain vector; the
additive noise std in the normalized domain follows the receive chain:

  * photocurrent noise std sigma_n from the shot + thermal budget, with the
    signal-dependent shot term evaluated at the true position (the
    simulator knows it, the estimator never does);
  * magnitude detection of a strong pilot keeps only the in-phase half of
    the complex bin noise, so the per-element std is sigma_n / sqrt(2);
  * division by the pilot normalization H * C_F * R_pd * S_led.

The location-only mode uses full-swing pilot tones (see ofdm.solve_h), the
location-and-communication mode the Gaussian clipping design at the
configured clipping factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import channel, frontend, ofdm
from ..scene import Scenario
from .config import SimConfig


@dataclass(frozen=True)
class ObservationModel:
    """Precomputed constants of one (configuration, mode) pair."""

    scenario: Scenario
    mode: str
    h_gain: float
    scaling: float
    conversion_w_per_a: float
    transmit_power_w: float
    noise_model: frontend.NoiseModel
    fixed_noise_a2: float  # background + dark + thermal (position independent)

    @classmethod
    def create(cls, sim: SimConfig, mode: str, scenario: Scenario | None = None):
        scenario = sim.build_scenario() if scenario is None else scenario
        cfg = sim.ofdm_config(mode)
        base = frontend.noise_variances(sim.noise, scenario.receiver, 0.0)
        return cls(
            scenario=scenario,
            mode=mode,
            h_gain=ofdm.solve_h(cfg),
            scaling=ofdm.effective_scaling(cfg),
            conversion_w_per_a=frontend.led_conversion_factor(sim.led),
            transmit_power_w=sim.transmit_power_w(),
            noise_model=sim.noise,
            fixed_noise_a2=base.background + base.dark_current + base.thermal,
        )

    @property
    def normalizer(self) -> float:
        return (
            self.h_gain
            * self.scaling
            * self.scenario.receiver.responsivity_a_per_w
            * self.conversion_w_per_a
        )

    def gains(self, positions: np.ndarray) -> np.ndarray:
        return channel.gain_vector(self.scenario, positions)

    def noise_variance_a2(self, positions: np.ndarray, gains: np.ndarray | None = None):
        """Total photocurrent noise variance at true position(s) [A^2]."""
        if gains is None:
            gains = self.gains(positions)
        received_w = gains.sum(axis=-1) * self.transmit_power_w
        shot_rs = (
            2.0
            * frontend.Q_ELECTRON
            * self.scenario.receiver.responsivity_a_per_w
            * received_w
            * self.noise_model.bandwidth_hz
        )
        return self.fixed_noise_a2 + shot_rs

    def sigma_omega(self, positions: np.ndarray, noise_variance_a2=None):
        """Per-element observation noise std in the normalized gain domain."""
        if noise_variance_a2 is None:
            noise_variance_a2 = self.noise_variance_a2(positions)
        return np.sqrt(np.asarray(noise_variance_a2) / 2.0) / self.normalizer

    def sigma_omega_fixed(self, noise_variance_a2: float) -> float:
        """Same conversion for an externally fixed photocurrent variance."""
        return float(np.sqrt(noise_variance_a2 / 2.0) / self.normalizer)

    def observe(self, positions: np.ndarray, standard_noise: np.ndarray) -> np.ndarray:
        """Noisy observations from pre-drawn standard normal deviates.

        Callers own the deviates so that identical draws can be reused
        across modes (paired comparisons) while the noise scale stays
        mode- and position-dependent.
        """
        gains = self.gains(positions)
        sigma = self.sigma_omega(positions)
        return gains + np.asarray(standard_noise) * np.asarray(sigma)[..., None]
