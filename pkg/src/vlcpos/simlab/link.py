"""Full transmit-to-receive simulation of one OFDM frame interval.

Composes the frame chain with the optical channel: every VAP builds its
frame, each LED's clipped group signal reaches the photodiode scaled by its
electric gain, white photocurrent noise is added per sample, the cyclic
prefix is stripped (the line-of-sight channel is flat, so it is pure
framing) and the pilot magnitudes are normalized back to gain units.

In location-and-communication mode only one designated VAP carries data
(avoiding co-channel data collisions); the other VAPs transmit pilots only
but share the same filter gain, so the receiver can keep a single
calibration. Their near-sinusoidal signals clip far less than the Gaussian
design assumes, which is precisely what degrades low-clipping-factor
operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import channel, frontend, ofdm
from ..scene import Scenario


@dataclass(frozen=True)
class LinkContext:
    """Constants of one chain configuration at a fixed true receiver position."""

    scenario: Scenario
    cfg: ofdm.OfdmConfig
    electric_gains: np.ndarray  # (K, M) photocurrent per modulation current
    conversion_w_per_a: float
    data_vap: int | None  # 1-based designated data carrier, None in LOM

    @classmethod
    def create(
        cls,
        scenario: Scenario,
        cfg: ofdm.OfdmConfig,
        led_model: frontend.LedModel,
        position: np.ndarray | None = None,
    ):
        conversion = frontend.led_conversion_factor(led_model)
        pos = scenario.receiver.position if position is None else position
        gains = channel.gain_vector(scenario, pos)
        ge = (
            conversion * gains * scenario.receiver.responsivity_a_per_w
        ).reshape(scenario.vap_count, scenario.leds_per_vap)
        data_vap = None
        if cfg.mode == "lcm":
            data_vap = int(ge.sum(axis=1).argmax()) + 1  # best-SNR VAP carries data
        return cls(
            scenario=scenario,
            cfg=cfg,
            electric_gains=ge,
            conversion_w_per_a=conversion,
            data_vap=data_vap,
        )

    def unit_group_signals(self, rng: np.random.Generator) -> np.ndarray:
        """Pre-clip per-LED signals for unit filter gain, shape (K, M, N).

        Drawing the data payload (designated VAP only) is the single rng
        consumption, so one call per realization keeps seeds reproducible.
        """
        k_count, m_count, n = self.scenario.vap_count, self.scenario.leds_per_vap, self.cfg.size
        out = np.empty((k_count, m_count, n))
        for k in range(1, k_count + 1):
            if self.cfg.mode == "lcm" and k == self.data_vap:
                frame = ofdm.modulate_vap(self.cfg, k, rng=rng, h_gain=1.0)
                out[k - 1] = frame.group_signals
            else:
                spectrum = ofdm.hermitian_extend(ofdm.allocate_pilots(self.cfg, k))
                for m in range(1, m_count + 1):
                    masked = ofdm.filter_bank(self.cfg, m, 1.0) * spectrum
                    out[k - 1, m - 1] = ofdm.idft(masked).real
        return out

    def receive(
        self,
        unit_signals: np.ndarray,
        noise: np.ndarray,
        h_gain: float | None = None,
        scaling: float | None = None,
    ) -> frontend.ObservationVector:
        """Clip, superpose at the photodiode, add noise, demodulate.

        ``noise`` is the per-sample photocurrent noise for the N retained
        samples [A]. Scaling ``unit_signals`` by the filter gain outside the
        transform lets one frame be swept over clipping factors cheaply.
        """
        cfg = self.cfg
        h = ofdm.solve_h(cfg) if h_gain is None else h_gain
        clipped = ofdm.hard_clip(
            unit_signals * h, cfg.lower_current_a, cfg.upper_current_a
        )
        with_cp = ofdm.add_cyclic_prefix(clipped, cfg.cyclic_prefix)
        photocurrent = np.einsum("km,kmn->n", self.electric_gains, with_cp)
        kept = ofdm.remove_cyclic_prefix(photocurrent, cfg.cyclic_prefix) + noise
        calibration = ofdm.RssCalibration(
            h_gain=h,
            scaling=ofdm.effective_scaling(cfg) if scaling is None else scaling,
            responsivity_a_per_w=self.scenario.receiver.responsivity_a_per_w,
            conversion_w_per_a=self.conversion_w_per_a,
        )
        return ofdm.demodulate_rss(kept, cfg, calibration)


def simulate_observation(
    scenario: Scenario,
    cfg: ofdm.OfdmConfig,
    led_model: frontend.LedModel,
    noise_std_a: float,
    rng: np.random.Generator,
    position: np.ndarray | None = None,
) -> frontend.ObservationVector:
    """One-shot chain run: frames, channel, noise, demodulation."""
    ctx = LinkContext.create(scenario, cfg, led_model, position)
    unit = ctx.unit_group_signals(rng)
    noise = rng.normal(0.0, noise_std_a, cfg.size) if noise_std_a > 0 else np.zeros(cfg.size)
    return ctx.receive(unit, noise)
