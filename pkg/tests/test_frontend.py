import numpy as np
import pytest

from vlcpos import (
    ConfigError,
    DomainError,
    GainMatrix,
    LedModel,
    NoiseModel,
    ObservationVector,
    ReceiverPose,
    led_conversion_factor,
    luminous_flux,
    noise_variances,
    normalized_noise_std,
    predistort,
    synthesize_observation,
)

RX = ReceiverPose(position=[2.5, 2.0, 1.0], normal=[0, 0, 1])


def test_flux_polynomial_values():
    assert luminous_flux(0.0) == pytest.approx(20.7)
    assert luminous_flux(1.0) == pytest.approx(694.76)
    assert luminous_flux(1.5) == pytest.approx(1008.3225)


def test_conversion_factor_published_value():
    assert led_conversion_factor(LedModel()) == pytest.approx(1.4812, abs=1e-4)


def test_conversion_factor_symmetric_limit_is_linear_slope():
    # symmetric limits cancel the quadratic term: exactly 0.0021 * c1
    for eps in (1.0, 0.1, 1e-3):
        model = LedModel(upper_current_a=eps, lower_current_a=-eps)
        assert led_conversion_factor(model) == pytest.approx(0.0021 * 705.35, rel=1e-12)


def test_conversion_factor_asymmetric_limits():
    model = LedModel(upper_current_a=1.0, lower_current_a=0.0)
    assert led_conversion_factor(model) == pytest.approx(0.0021 * (694.76 - 20.7), rel=1e-9)


def test_predistort_fixed_point():
    model = LedModel()
    assert predistort(0.0, model) == pytest.approx(model.bias_current_a, abs=1e-12)


def test_predistort_inverts_the_flux_curve(rng):
    model = LedModel()
    s_led = led_conversion_factor(model)
    x = rng.uniform(model.lower_current_a, model.upper_current_a, 1000)
    drive = predistort(x, model)
    optical = model.radiometric_w_per_lm * luminous_flux(drive, model)
    bias_optical = model.radiometric_w_per_lm * luminous_flux(model.bias_current_a, model)
    np.testing.assert_allclose(optical - bias_optical, s_led * x, rtol=1e-9, atol=1e-12)


def test_predistort_monotone():
    model = LedModel()
    x = np.linspace(model.lower_current_a, model.upper_current_a, 500)
    drive = predistort(x, model)
    assert np.all(np.diff(drive) > 0.0)


def test_predistort_rejects_unclipped_input():
    with pytest.raises(DomainError):
        predistort(1.5, LedModel())


def test_led_model_requires_monotone_flux():
    with pytest.raises(ConfigError):
        # vertex of the default curve sits near 11.3 A; biasing beyond it
        # puts part of the drive range on the falling branch
        LedModel(bias_current_a=12.0)


def test_noise_variance_published_values():
    nv = noise_variances(NoiseModel(), RX, 0.0)
    assert nv.background == pytest.approx(4.0144e-15, rel=1e-3)
    assert nv.dark_current == pytest.approx(1.6022e-23, rel=1e-3)
    assert nv.thermal_feedback == pytest.approx(6.5631e-17, rel=5e-3)
    # the full two-term expression is larger than the published figure
    assert nv.thermal == pytest.approx(1.011e-16, rel=1e-2)
    assert nv.total == pytest.approx(
        nv.background + nv.received_signal + nv.dark_current + nv.thermal, rel=1e-15
    )


def test_received_signal_noise_vanishes_without_light():
    assert noise_variances(NoiseModel(), RX, 0.0).received_signal == 0.0


def test_noise_monotonic_in_bandwidth_temperature_power():
    base = noise_variances(NoiseModel(), RX, 1e-4).total
    hot = noise_variances(NoiseModel(temperature_k=330.0), RX, 1e-4).total
    wide = noise_variances(NoiseModel(bandwidth_hz=12e6), RX, 1e-4).total
    bright = noise_variances(NoiseModel(), RX, 2e-4).total
    assert hot > base and wide > base and bright > base


def _gm():
    return GainMatrix(values=np.arange(1, 17, dtype=float).reshape(4, 4) * 1e-6)


def test_synthesize_zero_noise_is_exact(rng):
    gm = _gm()
    obs = synthesize_observation(gm, 0.0, rng)
    np.testing.assert_array_equal(obs.values, gm.vector)


def test_synthesize_reproducible():
    gm = _gm()
    a = synthesize_observation(gm, 1e-7, np.random.default_rng(11))
    b = synthesize_observation(gm, 1e-7, np.random.default_rng(11))
    assert np.array_equal(a.values, b.values)


def test_synthesize_noise_variance_matches(rng):
    gm = _gm()
    sigma = 2.5e-7
    draws = np.array([
        synthesize_observation(gm, sigma, rng).values - gm.vector for _ in range(6250)
    ])
    assert draws.size == 100_000
    assert np.var(draws) == pytest.approx(sigma**2, rel=0.02)


def test_synthesize_passes_negative_values(rng):
    gm = GainMatrix(values=np.full((4, 4), 1e-9))
    obs = synthesize_observation(gm, 1e-6, rng)
    assert np.any(obs.values < 0.0)


def test_synthesize_rician_mode(rng):
    gm = _gm()
    obs = synthesize_observation(gm, 1e-7, rng, mode="rician")
    assert np.all(obs.values >= 0.0)
    with pytest.raises(ConfigError):
        synthesize_observation(gm, 1e-7, rng, mode="bogus")


def test_observation_layout():
    obs = ObservationVector(values=np.arange(16.0), leds_per_vap=4, vap_count=4)
    assert obs.index(1, 1) == 0
    assert obs.index(3, 2) == 6
    assert obs.as_matrix()[2, 1] == obs.values[6]
    assert len(obs) == 16
    with pytest.raises(ConfigError):
        ObservationVector(values=np.arange(15.0), leds_per_vap=4, vap_count=4)


def test_normalized_noise_std():
    assert normalized_noise_std(1e-7, 16.0, 1.0, 0.54, 1.4812) == pytest.approx(
        1e-7 / (16.0 * 0.54 * 1.4812), rel=1e-12
    )
    with pytest.raises(ConfigError):
        normalized_noise_std(1e-7, 0.0, 1.0, 0.54, 1.4812)
