"""Hybrid 3-D localization from per-LED RSS observations.

Three stages, composable:

  * angle-of-arrival least squares: pick the strongest LED of each VAP and
    find the point minimizing the summed squared distances to the lines
    through those LEDs along their normals;
  * weighted variant: the same lines, each scaled by its observed RSS, so
    nearer (higher-SNR) luminaires dominate;
  * Gauss-Newton RSS refinement: iterate
        theta <- theta + eta * pinv(J(theta)) (s - p(theta))
    on the nonlinear observation map p (the channel gains), with the
    analytic Jacobian, until the step drops below ``eps`` or ``i_max``
    iterations are spent.

The hybrid locator seeds the refinement with the weighted-AoA estimate;
centroid and uniform-random starts exist for comparison. A closed-form
multiplication/division cost model accompanies the estimators and is also
tallied at run time (:class:`OpCounter`).

Scalar entry points operate on one observation; the ``*_batch`` variants
vectorize the same arithmetic over stacks of observations/starts for Monte
Carlo work and produce the same per-element results.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import gain_vector, jacobian
from .errors import ConfigError, SingularSystemError
from .frontend import ObservationVector
from .scene import Scenario

PINV_RCOND = 1e-10
ROOM_MARGIN_M = 0.5  # estimates farther outside the room than this are not "converged"

METHOD_TAGS = {"waoa": "waoa+rss", "centroid": "c+rss", "random": "rnd+rss"}


class OpCounter:
    """Running tally of the multiplication/division cost model."""

    def __init__(self):
        self.total = 0.0

    def add(self, n: float) -> None:
        self.total += n

    def as_int(self) -> int:
        return int(round(self.total))


@dataclass(frozen=True)
class EstimateReport:
    """Outcome of one localization: estimate, convergence record and cost."""

    position: np.ndarray
    method: str
    iterations: int
    converged: bool
    residual_history: tuple[float, ...]
    operation_count: int
    start_point: np.ndarray
    status: str = "ok"
    start_method: str | None = None
    start_fallback: bool = False


@dataclass(frozen=True)
class AoaSystem:
    """Per-selected-LED line projectors and intercepts, plus their stacks.

    projections[k] = I - n n^T annihilates the LED axis direction;
    intercepts[k] is the projection of the LED position onto that plane.
    """

    projections: np.ndarray  # (K, 3, 3)
    intercepts: np.ndarray  # (K, 3)
    weights: np.ndarray  # (K,)

    @property
    def stacked_matrix(self) -> np.ndarray:
        return self.projections.reshape(-1, 3)

    @property
    def stacked_intercept(self) -> np.ndarray:
        return self.intercepts.reshape(-1)


def led_lines(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Projectors A = I - n n^T and intercepts b = A r for every LED."""
    normals = scenario.led_normals
    projections = np.eye(3)[None, :, :] - normals[:, :, None] * normals[:, None, :]
    intercepts = np.einsum("lij,lj->li", projections, scenario.led_positions)
    return projections, intercepts


def select_strongest(s: ObservationVector) -> np.ndarray:
    """Index (0-based) of the strongest LED of each VAP; ties pick the lowest index."""
    return select_strongest_values(s.values, s.leds_per_vap, s.vap_count)


def select_strongest_values(values: np.ndarray, leds_per_vap: int, vap_count: int) -> np.ndarray:
    """Batch form of :func:`select_strongest` on raw (..., M*K) arrays."""
    values = np.asarray(values, dtype=float)
    return values.reshape(*values.shape[:-1], vap_count, leds_per_vap).argmax(axis=-1)


def _pinv_and_rank(a: np.ndarray, rcond: float = PINV_RCOND) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse with singular values below rcond * sigma_max zeroed.

    Works on stacks; returns (pinv with shape (..., n, m), rank (...,)).
    """
    u, sing, vt = np.linalg.svd(np.asarray(a, dtype=float), full_matrices=False)
    cutoff = rcond * sing.max(axis=-1, keepdims=True)
    keep = sing > cutoff
    inv = np.where(keep, np.divide(1.0, sing, out=np.zeros_like(sing), where=sing > 0), 0.0)
    pinv = np.einsum("...ji,...j,...kj->...ik", vt, inv, u)
    return pinv, keep.sum(axis=-1)


def pinv_cutoff(a: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """Rank-revealing pseudo-inverse used throughout the estimators."""
    return _pinv_and_rank(a, rcond)[0]


def _selected_flat(scenario: Scenario, xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi)
    offsets = np.arange(scenario.vap_count) * scenario.leds_per_vap
    return offsets + xi


def build_aoa_system(
    scenario: Scenario, xi: np.ndarray, weights: np.ndarray | None = None
) -> AoaSystem:
    """Assemble the line system for the selected LED of each VAP."""
    projections, intercepts = led_lines(scenario)
    flat = _selected_flat(scenario, xi)
    if weights is None:
        weights = np.ones(scenario.vap_count)
    return AoaSystem(
        projections=projections[flat],
        intercepts=intercepts[flat],
        weights=np.asarray(weights, dtype=float),
    )


def aoa_estimate(
    scenario: Scenario, xi: np.ndarray, counter: OpCounter | None = None
) -> np.ndarray:
    """Unweighted least-squares intersection of the selected LED lines."""
    system = build_aoa_system(scenario, xi)
    k = scenario.vap_count
    pinv, rank = _pinv_and_rank(system.stacked_matrix)
    if rank < 3:
        raise SingularSystemError("selected LED lines do not determine a 3-D point")
    if counter is not None:
        counter.add(54 * k + 27)  # pseudo-inverse of the (3K x 3) stack
        counter.add(9 * k)  # applying it to the stacked intercept
    return pinv @ system.stacked_intercept


def waoa_estimate(
    scenario: Scenario,
    s: np.ndarray | ObservationVector,
    xi: np.ndarray,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """RSS-weighted line solution: pinv(sum w A) (sum w b), w = observed strength.

    Note the aggregated system solved here is not the exact minimizer of
    sum w ||A theta - b||^2 (that one would aggregate A^T A, i.e. square
    the projectors); the lighter aggregate-first form is the contract, and
    it coincides with the unweighted solution under uniform weights only
    up to the aggregation order.
    """
    values = np.asarray(s, dtype=float)
    flat = _selected_flat(scenario, xi)
    weights = values[flat]
    system = build_aoa_system(scenario, xi, weights)
    k = scenario.vap_count
    a_w = np.einsum("k,kij->ij", weights, system.projections)
    b_w = weights @ system.intercepts
    pinv, rank = _pinv_and_rank(a_w)
    if rank < 3:
        raise SingularSystemError("weighted line system is singular")
    if counter is not None:
        counter.add(12 * k)  # weighting the projectors and intercepts
        counter.add(54 * k + 27)
        counter.add(9 * k)
    return pinv @ b_w


def _in_room(theta: np.ndarray, room_dims: np.ndarray, margin: float = ROOM_MARGIN_M):
    theta = np.asarray(theta)
    return np.all(theta >= -margin, axis=-1) & np.all(theta <= room_dims + margin, axis=-1)


def _iteration_cost(scenario: Scenario) -> tuple[float, float]:
    """(Jacobian build, residual step) costs per refinement iteration."""
    mk = scenario.num_leds
    n_l = scenario.lambertian_mode
    return mk * (3.0 * n_l + 48.0) / 2.0, mk * 51.0 / 2.0 + 27.0


def rss_refine(
    scenario: Scenario,
    s: np.ndarray | ObservationVector,
    theta0: np.ndarray,
    eta: float = 0.3,
    eps: float = 1e-5,
    i_max: int = 200,
    counter: OpCounter | None = None,
) -> EstimateReport:
    """Damped Gauss-Newton descent on || s - p(theta) ||.

    Stops once the update step is shorter than ``eps`` [m] or after
    ``i_max`` iterations. A rank-deficient Jacobian (fewer than three
    informative LEDs at the iterate) or a non-finite step flags divergence
    instead of raising. ``converged`` additionally requires the final point
    to lie within the room inflated by 0.5 m.
    """
    if not 0.0 < eta <= 1.0:
        raise ConfigError(f"step size must lie in (0, 1], got {eta}")
    values = np.asarray(s, dtype=float)
    theta = np.array(theta0, dtype=float)
    if theta.shape != (3,) or not np.all(np.isfinite(theta)):
        raise ConfigError(f"start point must be a finite 3-vector, got {theta0}")
    own = counter if counter is not None else OpCounter()
    mark = own.total
    jac_cost, step_cost = _iteration_cost(scenario)

    residual = values - gain_vector(scenario, theta)
    history = [float(np.linalg.norm(residual))]
    iterations = 0
    status = "max_iterations"
    for i in range(1, i_max + 1):
        jac = jacobian(scenario, theta)
        informative = int(np.any(jac != 0.0, axis=1).sum())
        pinv, rank = _pinv_and_rank(jac)
        if informative < 3 or rank < 3:
            status = "rank_deficient"
            break
        step = eta * (pinv @ residual)
        if not np.all(np.isfinite(step)):
            status = "non_finite"
            break
        theta = theta + step
        iterations = i
        own.add(jac_cost)
        own.add(step_cost)
        residual = values - gain_vector(scenario, theta)
        history.append(float(np.linalg.norm(residual)))
        if float(np.linalg.norm(step)) < eps:
            status = "step_tolerance"
            break
    converged = status == "step_tolerance" and bool(_in_room(theta, scenario.room_dims))
    return EstimateReport(
        position=theta,
        method="rss",
        iterations=iterations,
        converged=converged,
        residual_history=tuple(history),
        operation_count=int(round(own.total - mark)),
        start_point=np.array(theta0, dtype=float),
        status=status,
    )


def hybrid_locate(
    scenario: Scenario,
    s: np.ndarray | ObservationVector,
    eta: float = 0.3,
    eps: float = 1e-5,
    i_max: int = 200,
    start: str = "waoa",
    rng: np.random.Generator | None = None,
) -> EstimateReport:
    """Two-stage locator: pick a start point, then Gauss-Newton refine.

    start "waoa" (default) seeds with the weighted-AoA solution, falling
    back to the room centroid when that system is singular; "centroid" and
    "random" (uniform over the room, needs ``rng``) are the comparison
    policies.
    """
    values = np.asarray(s, dtype=float)
    counter = OpCounter()
    fallback = False
    if start == "waoa":
        xi = select_strongest_values(values, scenario.leds_per_vap, scenario.vap_count)
        try:
            theta0 = waoa_estimate(scenario, values, xi, counter=counter)
        except SingularSystemError:
            theta0 = scenario.centroid()
            fallback = True
    elif start == "centroid":
        theta0 = scenario.centroid()
    elif start == "random":
        if rng is None:
            raise ConfigError("random start policy needs a random generator")
        theta0 = rng.uniform(np.zeros(3), scenario.room_dims)
    else:
        raise ConfigError(f"unknown start policy {start!r}")

    report = rss_refine(scenario, values, theta0, eta=eta, eps=eps, i_max=i_max, counter=counter)
    return replace(
        report,
        method=METHOD_TAGS[start],
        operation_count=counter.as_int(),
        start_method=start,
        start_fallback=fallback,
    )


def op_count(
    method: str,
    vap_count: int,
    leds_per_vap: int | None = None,
    lambertian_mode: float | None = None,
    iterations: int | None = None,
) -> int:
    """Closed-form multiplication/division counts of the three locators.

    "aoa": 63K + 27; "waoa": 75K + 27;
    "rss": iterations * (M K (3 n_L + 99) / 2 + 27).
    """
    k = vap_count
    if method == "aoa":
        return 63 * k + 27
    if method == "waoa":
        return 75 * k + 27
    if method == "rss":
        if leds_per_vap is None or lambertian_mode is None or iterations is None:
            raise ConfigError("rss cost needs M, n_L and the iteration count")
        per_iter = leds_per_vap * k * (3.0 * lambertian_mode + 99.0) / 2.0 + 27.0
        return int(round(iterations * per_iter))
    raise ConfigError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Vectorized batch variants (same arithmetic, stacked over observations)
# ---------------------------------------------------------------------------


@dataclass
class BatchLocateResult:
    """Per-element outcomes of a batched localization run."""

    positions: np.ndarray  # (B, 3)
    iterations: np.ndarray  # (B,)
    converged: np.ndarray  # (B,) bool
    start_points: np.ndarray  # (B, 3)
    start_fallback: np.ndarray  # (B,) bool
    operation_counts: np.ndarray = field(default=None)  # (B,)


def aoa_batch(scenario: Scenario, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unweighted AoA over a stack of observations (B, M*K).

    Returns (positions (B, 3), singular mask); singular rows hold NaN.
    """
    values = np.atleast_2d(np.asarray(s, dtype=float))
    xi = select_strongest_values(values, scenario.leds_per_vap, scenario.vap_count)
    projections, intercepts = led_lines(scenario)
    flat = _selected_flat(scenario, xi)  # (B, K)
    a_stack = projections[flat].reshape(values.shape[0], -1, 3)
    b_stack = intercepts[flat].reshape(values.shape[0], -1)
    pinv, rank = _pinv_and_rank(a_stack)
    positions = np.einsum("bij,bj->bi", pinv, b_stack)
    singular = rank < 3
    positions[singular] = np.nan
    return positions, singular


def waoa_batch(scenario: Scenario, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted AoA over a stack of observations (B, M*K)."""
    values = np.atleast_2d(np.asarray(s, dtype=float))
    xi = select_strongest_values(values, scenario.leds_per_vap, scenario.vap_count)
    projections, intercepts = led_lines(scenario)
    flat = _selected_flat(scenario, xi)
    weights = np.take_along_axis(values, flat, axis=-1)  # (B, K)
    a_w = np.einsum("bk,bkij->bij", weights, projections[flat])
    b_w = np.einsum("bk,bki->bi", weights, intercepts[flat])
    pinv, rank = _pinv_and_rank(a_w)
    positions = np.einsum("bij,bj->bi", pinv, b_w)
    singular = rank < 3
    positions[singular] = np.nan
    return positions, singular


def refine_batch(
    scenario: Scenario,
    s: np.ndarray,
    theta0: np.ndarray,
    eta: float = 0.3,
    eps: float | None = 1e-5,
    i_max: int = 200,
) -> BatchLocateResult:
    """Gauss-Newton refinement over stacks of observations and starts.

    ``eps=None`` disables the step-tolerance stop, running exactly ``i_max``
    iterations everywhere (the fixed-iteration survey mode); converged then
    means "no failure and final point near the room". Otherwise semantics
    match :func:`rss_refine` element-wise.
    """
    if not 0.0 < eta <= 1.0:
        raise ConfigError(f"step size must lie in (0, 1], got {eta}")
    values = np.atleast_2d(np.asarray(s, dtype=float))
    theta = np.array(np.atleast_2d(np.asarray(theta0, dtype=float)))
    b = values.shape[0]
    jac_cost, step_cost = _iteration_cost(scenario)

    active = np.ones(b, dtype=bool)
    failed = np.zeros(b, dtype=bool)
    stopped_by_eps = np.zeros(b, dtype=bool)
    iterations = np.zeros(b, dtype=int)

    residual = values - gain_vector(scenario, theta)
    for i in range(1, i_max + 1):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        jac = jacobian(scenario, theta[idx])  # (b_active, MK, 3)
        informative = np.any(jac != 0.0, axis=2).sum(axis=1)
        pinv, rank = _pinv_and_rank(jac)
        step = eta * np.einsum("bij,bj->bi", pinv, residual[idx])
        bad = (informative < 3) | (rank < 3) | ~np.all(np.isfinite(step), axis=1)

        failed[idx[bad]] = True
        active[idx[bad]] = False

        good = idx[~bad]
        if good.size:
            theta[good] += step[~bad]
            iterations[good] = i
            residual[good] = values[good] - gain_vector(scenario, theta[good])
            if eps is not None:
                small = np.linalg.norm(step[~bad], axis=1) < eps
                stopped_by_eps[good[small]] = True
                active[good[small]] = False

    inside = _in_room(theta, scenario.room_dims)
    if eps is None:
        converged = ~failed & inside
    else:
        converged = stopped_by_eps & inside
    ops = iterations * (jac_cost + step_cost)
    return BatchLocateResult(
        positions=theta,
        iterations=iterations,
        converged=converged,
        start_points=np.atleast_2d(np.asarray(theta0, dtype=float)),
        start_fallback=np.zeros(b, dtype=bool),
        operation_counts=ops,
    )


def locate_batch(
    scenario: Scenario,
    s: np.ndarray,
    start: str = "waoa",
    eta: float = 0.3,
    eps: float | None = 1e-5,
    i_max: int = 200,
    random_starts: np.ndarray | None = None,
) -> BatchLocateResult:
    """Batched hybrid locator over observations (B, M*K).

    Random starts must be supplied by the caller (keeps draw order under
    the caller's seed discipline).
    """
    values = np.atleast_2d(np.asarray(s, dtype=float))
    b = values.shape[0]
    fallback = np.zeros(b, dtype=bool)
    extra_ops = np.zeros(b)
    if start == "waoa":
        theta0, singular = waoa_batch(scenario, values)
        if singular.any():
            theta0[singular] = scenario.centroid()
            fallback = singular
        # singular systems abort before the counted solve, as in the scalar path
        extra_ops += np.where(fallback, 0, 75 * scenario.vap_count + 27)
    elif start == "centroid":
        theta0 = np.tile(scenario.centroid(), (b, 1))
    elif start == "random":
        if random_starts is None:
            raise ConfigError("random start policy needs precomputed start points")
        theta0 = np.atleast_2d(np.asarray(random_starts, dtype=float))
    else:
        raise ConfigError(f"unknown start policy {start!r}")

    result = refine_batch(scenario, values, theta0, eta=eta, eps=eps, i_max=i_max)
    result.start_fallback = fallback
    result.operation_counts = result.operation_counts + extra_ops
    return result
