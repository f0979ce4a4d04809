import numpy as np
import pytest

from vlcpos import (
    ConfigError,
    LedTx,
    ObservationVector,
    ReceiverPose,
    Scenario,
    SingularSystemError,
    aoa_estimate,
    gain_vector,
    hybrid_locate,
    op_count,
    rss_refine,
    select_strongest,
    waoa_estimate,
)
from vlcpos.estimators import (
    OpCounter,
    aoa_batch,
    build_aoa_system,
    led_lines,
    locate_batch,
    refine_batch,
    select_strongest_values,
    waoa_batch,
)


def _line_scenario(lines, room=(5.0, 4.0, 3.0)):
    """Synthetic scene whose 'LEDs' are arbitrary (point, direction) lines, M=1."""
    leds = tuple(
        LedTx(position=p, normal=np.asarray(n, float) / np.linalg.norm(n), vap_index=k + 1, led_index=1)
        for k, (p, n) in enumerate(lines)
    )
    rx = ReceiverPose(position=[2.5, 2.0, 1.0], normal=[0, 0, 1])
    return Scenario(
        room_dims=np.asarray(room),
        leds=leds,
        receiver=rx,
        lambertian_mode=10.0,
        bias_current_a=1.5,
        upper_current_a=1.0,
        lower_current_a=-1.0,
        theta_wall_rad=0.0,
        theta_ceiling_rad=0.0,
        alpha_rad=0.0,
        vap_count=len(leds),
        leds_per_vap=1,
    )


# --- selection ---------------------------------------------------------------


def test_select_strongest_on_axis(scenario):
    # receiver placed on the axis of LED 2 of VAP 1 sees it as the strongest
    led = scenario.led(2, 1)
    pos = led.position + 1.6 * led.normal
    gains = gain_vector(scenario, pos)
    obs = ObservationVector(values=gains, leds_per_vap=4, vap_count=4)
    assert select_strongest(obs)[0] == 1  # 0-based index of LED 2


def test_select_strongest_tie_and_scaling(scenario):
    obs = ObservationVector(values=np.ones(16), leds_per_vap=4, vap_count=4)
    np.testing.assert_array_equal(select_strongest(obs), [0, 0, 0, 0])
    gains = gain_vector(scenario, np.array([2.1, 1.3, 0.8]))
    xi1 = select_strongest_values(gains, 4, 4)
    xi2 = select_strongest_values(17.3 * gains, 4, 4)
    np.testing.assert_array_equal(xi1, xi2)


# --- line systems --------------------------------------------------------------


def test_projector_properties(scenario):
    projections, intercepts = led_lines(scenario)
    for a, n, r in zip(projections, scenario.led_normals, scenario.led_positions):
        np.testing.assert_allclose(a, a.T, atol=1e-15)
        np.testing.assert_allclose(a @ a, a, atol=1e-12)
        np.testing.assert_allclose(a @ n, 0.0, atol=1e-12)
        assert np.linalg.matrix_rank(a) == 2
    np.testing.assert_allclose(intercepts, np.einsum("lij,lj->li", projections, scenario.led_positions))


def test_aoa_two_line_intersection():
    sc = _line_scenario([((0, 0, 3), (0, 0, -1)), ((0, 0, 1), (1, 0, 0))])
    est = aoa_estimate(sc, np.zeros(2, dtype=int))
    np.testing.assert_allclose(est, [0.0, 0.0, 1.0], atol=1e-12)


def test_aoa_single_line_singular():
    sc = _line_scenario([((0, 0, 3), (0, 0, -1))])
    with pytest.raises(SingularSystemError):
        aoa_estimate(sc, np.zeros(1, dtype=int))


def test_aoa_exact_recovery_on_concurrent_lines():
    # four lines through one common point: zero residual, exact recovery
    target = np.array([2.0, 1.5, 1.0])
    points = [(0, 0, 3), (5, 0, 3), (5, 4, 3), (0, 4, 3)]
    sc = _line_scenario([(p, target - np.asarray(p, float)) for p in points])
    est = aoa_estimate(sc, np.zeros(4, dtype=int))
    np.testing.assert_allclose(est, target, atol=1e-9)
    system = build_aoa_system(sc, np.zeros(4, dtype=int))
    residual = system.stacked_matrix @ est - system.stacked_intercept
    assert np.abs(residual).max() < 1e-12


def test_waoa_scale_invariance(scenario, rng):
    gains = gain_vector(scenario, np.array([1.4, 2.2, 0.9]))
    s = gains + rng.normal(0, 1e-7, 16)
    xi = select_strongest_values(s, 4, 4)
    a = waoa_estimate(scenario, s, xi)
    b = waoa_estimate(scenario, 3.7 * s, xi)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_waoa_two_line_limit():
    target = np.array([1.0, 1.0, 1.0])
    points = [(0, 0, 3), (5, 0, 3), (5, 4, 3)]
    sc = _line_scenario([(p, target - np.asarray(p, float)) for p in points[:2]]
                        + [((5, 4, 3), (0, 0, -1))])
    # weight zero on the third (non-concurrent) line: exact two-line intersection
    s = np.array([1.0, 1.0, 0.0])
    est = waoa_estimate(sc, s, np.zeros(3, dtype=int))
    np.testing.assert_allclose(est, target, atol=1e-9)


def test_waoa_singular():
    sc = _line_scenario([((0, 0, 3), (0, 0, -1))])
    with pytest.raises(SingularSystemError):
        waoa_estimate(sc, np.array([1.0]), np.zeros(1, dtype=int))


# --- Gauss-Newton refinement ----------------------------------------------------


def test_refine_fixed_point(scenario):
    theta = np.array([2.0, 1.5, 1.2])
    s = gain_vector(scenario, theta)
    report = rss_refine(scenario, s, theta)
    assert report.iterations == 1
    assert report.converged and report.status == "step_tolerance"
    np.testing.assert_allclose(report.position, theta, atol=1e-12)
    assert len(report.residual_history) == report.iterations + 1


def test_refine_basin_of_attraction(scenario):
    theta = np.array([2.0, 1.5, 1.0])
    s = gain_vector(scenario, theta)
    report = rss_refine(scenario, s, theta + 0.2, eta=0.3, eps=1e-8, i_max=200)
    assert report.converged
    assert np.linalg.norm(report.position - theta) < 1e-6


def test_refine_reports_rank_deficiency(scenario):
    # above the luminaires nothing is visible: no informative rows at all
    s = np.full(16, 1e-6)
    report = rss_refine(scenario, s, np.array([2.5, 2.0, 3.4]))
    assert not report.converged
    assert report.status == "rank_deficient"
    assert report.iterations == 0


def test_refine_flags_non_finite(scenario):
    s = np.full(16, 1e280)
    report = rss_refine(scenario, s, np.array([2.5, 2.0, 1.0]))
    assert not report.converged
    assert report.status in ("non_finite", "rank_deficient")


def test_refine_validates_inputs(scenario):
    s = np.zeros(16)
    with pytest.raises(ConfigError):
        rss_refine(scenario, s, np.array([1.0, 1.0, 1.0]), eta=0.0)
    with pytest.raises(ConfigError):
        rss_refine(scenario, s, np.array([np.nan, 1.0, 1.0]))


def test_refine_residual_monotone_noise_free(scenario, rng):
    """Damped Gauss-Newton shrinks the residual from nearby starts."""
    lo = np.array([0.6, 0.6, 0.3])
    hi = np.array([4.4, 3.4, 1.8])
    bad = 0
    total = 1000
    for _ in range(total):
        theta = rng.uniform(lo, hi)
        start = theta + rng.uniform(-0.5, 0.5, 3)
        s = gain_vector(scenario, theta)
        report = rss_refine(scenario, s, start, eta=0.3, eps=1e-5, i_max=60)
        history = np.array(report.residual_history)
        if np.any(np.diff(history) > 1e-15 * history[0]):
            bad += 1
    assert bad <= 0.01 * total


def test_hybrid_start_policies(scenario, rng):
    theta = np.array([1.8, 1.2, 0.9])
    s = gain_vector(scenario, theta)
    for start, tag in (("waoa", "waoa+rss"), ("centroid", "c+rss"), ("random", "rnd+rss")):
        report = hybrid_locate(scenario, s, eps=1e-7, start=start, rng=rng)
        assert report.method == tag and report.start_method == start
        assert np.linalg.norm(report.position - theta) < 1e-6
    with pytest.raises(ConfigError):
        hybrid_locate(scenario, s, start="random")  # rng required
    with pytest.raises(ConfigError):
        hybrid_locate(scenario, s, start="bogus")


def test_hybrid_noise_free_everywhere(scenario, rng):
    for _ in range(10):
        theta = rng.uniform([0.6, 0.6, 0.3], [4.4, 3.4, 1.6])
        s = gain_vector(scenario, theta)
        report = hybrid_locate(scenario, s, eps=1e-7)
        assert report.converged
        assert np.linalg.norm(report.position - theta) < 1e-6


def test_hybrid_fallback_on_singular_waoa():
    # a single luminaire gives one line: weighted system is rank 2
    points = [(0, 0, 3)]
    sc = _line_scenario([(p, (0, 0, -1)) for p in points])
    s = np.array([1e-5])
    report = hybrid_locate(sc, s, i_max=5)
    assert report.start_fallback
    np.testing.assert_allclose(report.start_point, sc.centroid())


# --- operation counts ------------------------------------------------------------


def test_op_count_closed_forms():
    assert op_count("aoa", 4) == 279
    assert op_count("waoa", 4) == 327
    assert op_count("rss", 4, 4, 10, 1) == 1059
    assert op_count("rss", 4, 4, 10, 7) == 7 * 1059
    assert op_count("rss", 4, 4, 10, 1) / op_count("waoa", 4) == pytest.approx(3.24, abs=0.01)
    # affine in the luminaire count, slope 63 (aoa) and 75 (waoa)
    for k in range(1, 8):
        assert op_count("aoa", k + 1) - op_count("aoa", k) == 63
        assert op_count("waoa", k + 1) - op_count("waoa", k) == 75
    with pytest.raises(ConfigError):
        op_count("rss", 4)
    with pytest.raises(ConfigError):
        op_count("other", 4)


def test_instrumented_counters_match_closed_forms(scenario):
    gains = gain_vector(scenario, np.array([1.25, 1.0, 1.0]))
    xi = select_strongest_values(gains, 4, 4)
    counter = OpCounter()
    aoa_estimate(scenario, xi, counter=counter)
    assert counter.as_int() == op_count("aoa", 4)
    counter = OpCounter()
    waoa_estimate(scenario, gains, xi, counter=counter)
    assert counter.as_int() == op_count("waoa", 4)
    report = rss_refine(scenario, gains, np.array([2.0, 2.0, 1.0]))
    assert report.operation_count == op_count("rss", 4, 4, 10, report.iterations)
    hybrid = hybrid_locate(scenario, gains)
    assert hybrid.operation_count == op_count("waoa", 4) + op_count(
        "rss", 4, 4, 10, hybrid.iterations
    )


# --- batch variants ----------------------------------------------------------------


def test_batch_matches_scalar(scenario, rng):
    theta = rng.uniform([0.8, 0.8, 0.4], [4.2, 3.2, 1.6], (32, 3))
    gains = gain_vector(scenario, theta)
    s = gains + rng.normal(0, 2e-7, gains.shape)
    starts = theta + rng.uniform(-0.4, 0.4, theta.shape)

    batch = refine_batch(scenario, s, starts, eta=0.3, eps=1e-5, i_max=200)
    for i in range(len(theta)):
        scalar = rss_refine(scenario, s[i], starts[i], eta=0.3, eps=1e-5, i_max=200)
        assert batch.iterations[i] == scalar.iterations
        assert bool(batch.converged[i]) == scalar.converged
        np.testing.assert_allclose(batch.positions[i], scalar.position, rtol=0, atol=1e-12)

    pa, sing = aoa_batch(scenario, s)
    pw, sing_w = waoa_batch(scenario, s)
    for i in range(len(theta)):
        xi = select_strongest_values(s[i], 4, 4)
        np.testing.assert_allclose(pa[i], aoa_estimate(scenario, xi), atol=1e-12)
        np.testing.assert_allclose(pw[i], waoa_estimate(scenario, s[i], xi), atol=1e-12)
    assert not sing.any() and not sing_w.any()


def test_locate_batch_matches_hybrid(scenario, rng):
    theta = rng.uniform([1.0, 1.0, 0.5], [4.0, 3.0, 1.5], (8, 3))
    s = gain_vector(scenario, theta) + rng.normal(0, 1e-7, (8, 16))
    batch = locate_batch(scenario, s, start="waoa")
    for i in range(8):
        scalar = hybrid_locate(scenario, s[i], start="waoa")
        np.testing.assert_allclose(batch.positions[i], scalar.position, atol=1e-12)
        assert batch.iterations[i] == scalar.iterations
        assert batch.operation_counts[i] == scalar.operation_count


def test_locate_batch_fixed_iterations(scenario, rng):
    theta = rng.uniform([1.0, 1.0, 0.5], [4.0, 3.0, 1.5], (6, 3))
    s = gain_vector(scenario, theta) + rng.normal(0, 1e-8, (6, 16))
    res = locate_batch(scenario, s, start="waoa", eps=None, i_max=30)
    assert np.all(res.iterations == 30)
    assert np.all(res.converged)
    # 30 damped iterations leave (1 - eta)^30 of the start offset: a few mm
    assert np.linalg.norm(res.positions - theta, axis=1).max() < 5e-3


def test_locate_batch_random_requires_starts(scenario):
    with pytest.raises(ConfigError):
        locate_batch(scenario, np.zeros((2, 16)), start="random")


def test_locate_batch_waoa_fallback(scenario):
    # a single positive link leaves the weighted system rank 2: centroid start
    s = np.zeros((2, 16))
    s[:, 5] = 1e-5
    res = locate_batch(scenario, s, start="waoa", i_max=3)
    assert res.start_fallback.all()
    np.testing.assert_allclose(res.start_points, np.tile(scenario.centroid(), (2, 1)))
