import numpy as np
import pytest
from scipy.stats import norm

from vlcpos import (
    ConfigError,
    DomainError,
    OfdmConfig,
    RssCalibration,
    channel_capacity,
    clipping_noise_variance,
    clipping_noise_variance_symmetric,
    demodulate_rss,
    dft,
    effective_scaling,
    hard_clip,
    hermitian_extend,
    idft,
    modulate_vap,
    scaling_factor,
    solve_h,
)
from vlcpos.ofdm import (
    add_cyclic_prefix,
    allocate_data,
    allocate_pilots,
    filter_bank,
    frame_to_csv,
    group_std,
    papr,
    qpsk_symbols,
    remove_cyclic_prefix,
)

CFG = OfdmConfig()
LCM = OfdmConfig(mode="lcm")


# --- configuration ----------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        {"size": 1000},
        {"size": 0},
        {"size": 1024, "leds_per_vap": 3},  # N/(2M) not integer
        {"size": 32, "leds_per_vap": 4, "vap_count": 4},  # group too small for pilots
        {"mode": "other"},
        {"gamma": 0.0},
        {"lower_current_a": 1.0, "upper_current_a": -1.0},
        {"cp_len": 5000},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        OfdmConfig(**kwargs)


def test_pilot_bins():
    assert [CFG.pilot_bin(m, 1) for m in range(1, 5)] == [1, 129, 257, 385]
    assert [CFG.pilot_bin(m, 4) for m in range(1, 5)] == [4, 132, 260, 388]


def test_dc_and_nyquist_never_assigned():
    for k in range(1, 5):
        half = allocate_data(LCM, k, qpsk_symbols(np.random.default_rng(0), LCM.data_capacity))
        assert half[0] == 0.0
        full = hermitian_extend(half)
        assert full[0] == 0.0 and full[LCM.size // 2] == 0.0


def test_data_capacity_and_bins():
    assert LCM.data_capacity == 512 - 4 * 5 == 492
    assert list(LCM.data_bins(1)) == list(range(5, 128))
    assert CFG.data_capacity == 0 and len(CFG.data_bins(1)) == 0
    assert LCM.active_bins_per_group == 124 and CFG.active_bins_per_group == 1


def test_allocate_data_pads_and_rejects():
    short = allocate_data(LCM, 1, np.ones(10, dtype=complex))
    assert np.count_nonzero(short) == 10 + 4  # data + pilots
    with pytest.raises(ConfigError):
        allocate_data(LCM, 1, np.ones(LCM.data_capacity + 1, dtype=complex))


def test_allocate_pilots_unit_modulus_enforced():
    with pytest.raises(ConfigError):
        allocate_pilots(CFG, 1, pilot_symbols=np.array([2.0, 1, 1, 1], dtype=complex))


# --- transforms and framing --------------------------------------------------


def test_hermitian_single_pilot_gives_cosine():
    half = np.zeros(512, dtype=complex)
    half[1] = 1.0
    x = idft(hermitian_extend(half))
    i = np.arange(1024)
    np.testing.assert_allclose(x.real, (2 / np.sqrt(1024)) * np.cos(2 * np.pi * i / 1024), atol=1e-12)
    assert np.abs(x.imag).max() < 1e-12


def test_hermitian_zero_and_dc_guard():
    assert np.all(hermitian_extend(np.zeros(512, dtype=complex)) == 0.0)
    bad = np.zeros(512, dtype=complex)
    bad[0] = 1.0
    with pytest.raises(ConfigError):
        hermitian_extend(bad)


def test_hermitian_random_frames_are_real(rng):
    for _ in range(5):
        half = np.zeros(512, dtype=complex)
        half[1:] = rng.normal(size=511) + 1j * rng.normal(size=511)
        x = idft(hermitian_extend(half))
        assert np.abs(x.imag).max() < 1e-12


def test_transform_pair():
    x = idft(np.sqrt(1024) * np.eye(1024, dtype=complex)[0])
    np.testing.assert_allclose(x, np.ones(1024), atol=1e-12)
    rng = np.random.default_rng(3)
    spec = rng.normal(size=256) + 1j * rng.normal(size=256)
    np.testing.assert_allclose(dft(idft(spec)), spec, atol=1e-12)
    assert np.sum(np.abs(idft(spec)) ** 2) == pytest.approx(np.sum(np.abs(spec) ** 2), rel=1e-12)
    with pytest.raises(ConfigError):
        dft(np.zeros(100))


def test_filter_bank_partitions_spectrum():
    h = 2.5
    masks = np.stack([filter_bank(CFG, m, h) for m in range(1, 5)])
    np.testing.assert_allclose(masks.sum(axis=0), h)
    assert np.all((masks > 0).sum(axis=0) == 1)  # disjoint supports
    # each group's upper-half support mirrors its lower-half bins
    for m in range(1, 5):
        lower = np.nonzero(masks[m - 1][:512])[0]
        upper = np.nonzero(masks[m - 1][512:])[0] + 512
        assert set(upper) == {1023 - b for b in lower}


def test_masked_frames_stay_hermitian(rng):
    frame = modulate_vap(LCM, 2, rng=rng)
    assert np.abs(frame.group_signals.imag).max() if np.iscomplexobj(frame.group_signals) else True
    # real group signals already checked by dtype; verify via reconstruction
    for m in range(1, 5):
        masked = filter_bank(LCM, m, solve_h(LCM)) * frame.spectrum
        assert np.abs(idft(masked).imag).max() < 1e-12


def test_solve_h_gaussian_design():
    # gamma follows from sigma via the dynamic range: sigma 0.1 <-> gamma 10
    cfg = OfdmConfig(mode="lcm", gamma=10.0)
    sigma_m = (cfg.upper_current_a - cfg.lower_current_a) / (2 * cfg.gamma)
    assert sigma_m == pytest.approx(0.1)
    assert group_std(cfg, solve_h(cfg)) == pytest.approx(sigma_m, rel=1e-12)


def test_group_std_formula_value():
    # 123 active bins at unit gain: sigma = sqrt(2 * 123 / 1024)
    cfg = OfdmConfig(mode="lcm", vap_count=5)
    assert cfg.active_bins_per_group == 123
    assert group_std(cfg, 1.0) == pytest.approx(0.49014, abs=1e-5)


def test_lom_pilot_tone_is_full_swing():
    h = solve_h(CFG)
    assert h == pytest.approx(2.0 * np.sqrt(1024) / 4.0)  # (Iu - Il) sqrt(N) / 4
    frame = modulate_vap(CFG, 1, h_gain=h)
    peaks = np.abs(frame.group_signals).max(axis=1)
    np.testing.assert_allclose(peaks, 1.0, rtol=1e-9)
    # rail-to-rail tone never clips
    np.testing.assert_allclose(frame.clipped_signals, frame.group_signals)
    assert effective_scaling(CFG) == 1.0


def test_hard_clip():
    np.testing.assert_array_equal(hard_clip([0.5, -0.5], -1, 1), [0.5, -0.5])
    np.testing.assert_array_equal(hard_clip([2.0, -2.0], -1, 1), [1.0, -1.0])
    with pytest.raises(ConfigError):
        hard_clip([0.0], 1.0, -1.0)


# --- clipping analytics -------------------------------------------------------


def test_scaling_factor_values():
    # independent oracle: central Gaussian mass via the normal CDF
    assert scaling_factor(1.0) == pytest.approx(norm.cdf(1) - norm.cdf(-1), rel=1e-12)
    assert scaling_factor(1.0) == pytest.approx(0.682689, abs=1e-6)
    assert scaling_factor(50.0) == 1.0
    assert 1e-13 < 1.0 - scaling_factor(7.4) < 2e-13
    with pytest.raises(DomainError):
        scaling_factor(0.0)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 4.0, 8.0])
def test_clip_variance_symmetric_reduction(gamma):
    general = clipping_noise_variance(gamma, 1.0, -1.0)
    simplified = clipping_noise_variance_symmetric(gamma, 1.0)
    assert general == pytest.approx(simplified, abs=1e-12, rel=1e-12)


def test_clip_variance_vanishes_without_clipping():
    assert clipping_noise_variance(30.0, 1.0, -1.0) == pytest.approx(0.0, abs=1e-30)


def test_clip_variance_monte_carlo(rng):
    gamma = 2.0
    sigma = 1.0 / gamma
    x = rng.normal(0.0, sigma, 1_000_000)
    c = scaling_factor(gamma)
    empirical = np.var(np.clip(x, -1, 1) - c * x)
    assert empirical == pytest.approx(clipping_noise_variance(gamma, 1.0, -1.0), rel=0.02)


def test_clip_variance_monte_carlo_asymmetric(rng):
    upper, lower, gamma = 1.2, -0.8, 2.0
    sigma = (upper - lower) / (2 * gamma)
    x = rng.normal(0.0, sigma, 1_000_000)
    lam_l, lam_u = lower / sigma, upper / sigma
    c = norm.cdf(lam_u) - norm.cdf(lam_l)
    empirical = np.var(np.clip(x, lower, upper) - c * x)
    assert empirical == pytest.approx(clipping_noise_variance(gamma, upper, lower), rel=0.02)


def test_measured_attenuation_matches_scaling_factor(rng):
    """Clipped LCM frames attenuate their own bins by C_F (Bussgang gain)."""
    for gamma in (1.0, 2.0):
        cfg = LCM.with_gamma(gamma)
        h = solve_h(cfg)
        num = den = 0.0
        for _ in range(200):
            frame = modulate_vap(cfg, 1, rng=rng, h_gain=h)
            for m in range(4):
                x = frame.group_signals[m]
                u = frame.clipped_signals[m]
                num += float(x @ u)
                den += float(x @ x)
        assert num / den == pytest.approx(scaling_factor(gamma), rel=0.01)


def test_capacity_prefactor_and_limits():
    cfg = LCM
    prefactor = (cfg.bandwidth_hz / cfg.size) * (cfg.data_symbol_count / cfg.leds_per_vap)
    assert prefactor == pytest.approx(1.2012e6, rel=1e-4)
    c_small = channel_capacity(cfg, 1e-5, 1e3, 7.4)
    c_large = channel_capacity(cfg, 1e-5, 1e-15, 7.4)
    assert c_small < 1.0 < 1e6 < c_large
    assert channel_capacity(cfg, 1e-5, 1e-14, 7.4) < c_large
    with pytest.raises(DomainError):
        channel_capacity(cfg, 0.0, 1e-15, 7.4)


def test_data_bins_override_feeds_capacity():
    cfg = OfdmConfig(mode="lcm", data_bins_override=496)
    assert cfg.data_symbol_count == 496
    assert cfg.data_capacity == 492  # allocation layout unchanged


# --- frame-level properties ---------------------------------------------------


def test_group_superposition(rng):
    frame = modulate_vap(LCM, 1, rng=rng)
    h = solve_h(LCM)
    total = idft(h * frame.spectrum).real
    np.testing.assert_allclose(frame.group_signals.sum(axis=0), total, atol=1e-12)


def test_group_variance_matches_design(rng):
    cfg = LCM.with_gamma(7.4)
    h = solve_h(cfg)
    target = group_std(cfg, h) ** 2
    acc = 0.0
    n_frames = 150
    for _ in range(n_frames):
        frame = modulate_vap(cfg, 1, rng=rng, h_gain=h)
        acc += float(np.mean(frame.group_signals**2))
    assert acc / n_frames / 4 * 4 == pytest.approx(target, rel=0.02)


def test_cyclic_prefix_roundtrip(rng):
    x = rng.normal(size=256)
    y = add_cyclic_prefix(x, 16)
    assert y.shape == (272,)
    np.testing.assert_array_equal(y[:16], x[-16:])
    np.testing.assert_array_equal(remove_cyclic_prefix(y, 16), x)


def test_papr_recorded(rng):
    lom_frame = modulate_vap(CFG, 1)
    lcm_frame = modulate_vap(LCM, 1, rng=rng)
    papr_lom = papr(lom_frame.group_signals[0])
    papr_lcm = papr(lcm_frame.group_signals[0])
    print(f"PAPR: single-tone group {papr_lom:.2f}, loaded group {papr_lcm:.2f}")
    assert np.isfinite(papr_lom) and papr_lom >= 1.0
    assert np.isfinite(papr_lcm) and papr_lcm >= 1.0
    assert papr_lom == pytest.approx(2.0, rel=1e-6)  # pure cosine


def test_demodulate_pilots_unit_calibration():
    h = solve_h(CFG)
    signal = np.zeros(CFG.size)
    for k in range(1, 5):
        frame = modulate_vap(CFG, k, h_gain=h)
        signal = signal + frame.clipped_signals.sum(axis=0)
    cal = RssCalibration(h_gain=h, scaling=1.0, responsivity_a_per_w=1.0, conversion_w_per_a=1.0)
    obs = demodulate_rss(signal, CFG, cal)
    np.testing.assert_allclose(obs.values, 1.0, rtol=1e-9)


def test_demodulate_zero_and_linearity(rng):
    cal = RssCalibration(h_gain=2.0, scaling=1.0, responsivity_a_per_w=0.5, conversion_w_per_a=1.5)
    assert np.all(demodulate_rss(np.zeros(CFG.size), CFG, cal).values == 0.0)
    y = rng.normal(size=CFG.size)
    obs1 = demodulate_rss(y, CFG, cal)
    obs3 = demodulate_rss(3.0 * y, CFG, cal)
    np.testing.assert_allclose(obs3.values, 3.0 * obs1.values, rtol=1e-12)


def test_calibration_validation():
    with pytest.raises(ConfigError):
        RssCalibration(h_gain=0.0, scaling=1.0, responsivity_a_per_w=1.0, conversion_w_per_a=1.0)


def test_frame_csv_export(tmp_path):
    half = allocate_pilots(CFG, 1)
    spectrum = hermitian_extend(half)
    path = tmp_path / "frame.csv"
    frame_to_csv(spectrum, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "bin,real,imag"
    assert len(lines) == 1 + CFG.size
    assert lines[2].startswith("1,1,")  # pilot bin of (m=1, k=1)
