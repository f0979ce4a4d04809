"""Monte Carlo experiment drivers.

Determinism contract shared by every experiment:

  * realization ``r`` draws exclusively from a generator seeded with
    ``SeedSequence(base_seed, spawn_key=(r,))``; the draw order within one
    realization is fixed and documented per experiment;
  * identical standard normal deviates are reused across operation modes
    and sweep points (paired comparisons / common random numbers);
  * worker threads process contiguous realization chunks and results are
    concatenated in realization order, so the output is byte-identical for
    any thread count.

Aggregation conventions: error statistics quantize each per-run error to
the 9 significant digits that reach the CSV before aggregating, so a
re-read file reproduces every reported RMSE exactly. Mean errors and RMSE
are taken over converged runs where a convergence flag exists; sweep-style
RMSE over all runs clamps each error at the room diagonal (a diverged fix
counts as a room-sized miss).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import channel, estimators, ofdm
from .config import SimConfig, realization_rng
from .io import METRIC_FIELDS
from .link import LinkContext
from .observations import ObservationModel

RSS_METHODS = ("rnd+rss", "c+rss", "waoa+rss")
ALL_METHODS = ("aoa", "waoa") + RSS_METHODS
START_OF = {"rnd+rss": "random", "c+rss": "centroid", "waoa+rss": "waoa"}


@dataclass
class ExperimentResult:
    name: str
    header: list[str]
    rows: list[list]
    summary: list[str]
    plot_data: dict = field(default_factory=dict)

    def print_summary(self) -> None:
        for line in self.summary:
            print(line)


def _quantize(x: float) -> float:
    """Round to the 9 significant digits that reach the CSV."""
    return float(f"{x:.9g}")


def _chunks(realizations: int, threads: int) -> list[tuple[int, int]]:
    parts = min(max(threads, 1), realizations)
    bounds = np.linspace(0, realizations, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_chunked(worker, realizations: int, threads: int) -> list:
    spans = _chunks(realizations, threads)
    if len(spans) == 1:
        return [worker(*spans[0])]
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        futures = [pool.submit(worker, a, b) for a, b in spans]
        return [f.result() for f in futures]


def _rmse(errors: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(errors)))) if errors.size else float("nan")


def _locate_all(scenario, s, starts_random, params, eps, i_max):
    """Run the three RSS starts on one observation batch."""
    out = {}
    for method in RSS_METHODS:
        out[method] = estimators.locate_batch(
            scenario,
            s,
            start=START_OF[method],
            eta=params.eta,
            eps=eps,
            i_max=i_max,
            random_starts=starts_random,
        )
    return out


# ---------------------------------------------------------------------------
# probe-position table
# ---------------------------------------------------------------------------


def run_positions_table(sim: SimConfig) -> ExperimentResult:
    """Errors and iteration counts of all five locators at the probe positions.

    Per realization and probe (in config order) the draws are: one standard
    normal vector for the observation noise, then one uniform random start.
    Both operation modes consume the same draws.
    """
    scenario = sim.build_scenario()
    probes = np.asarray(sim.experiment.probe_positions, dtype=float)
    n_probes, mk = len(probes), scenario.num_leds
    modes = ("lom", "lcm")
    models = {m: ObservationModel.create(sim, m, scenario) for m in modes}
    params = sim.estimator
    seed, reals = sim.experiment.base_seed, sim.experiment.realizations

    def worker(r0: int, r1: int) -> dict:
        n = r1 - r0
        z = np.empty((n, n_probes, mk))
        starts = np.empty((n, n_probes, 3))
        for i, r in enumerate(range(r0, r1)):
            rng = realization_rng(seed, r)
            for p in range(n_probes):
                z[i, p] = rng.normal(0.0, 1.0, mk)
                starts[i, p] = rng.uniform(np.zeros(3), scenario.room_dims)
        err = np.empty((n, len(modes), n_probes, len(ALL_METHODS)))
        its = np.zeros_like(err, dtype=int)
        conv = np.zeros(err.shape, dtype=bool)
        for mi, mode in enumerate(modes):
            model = models[mode]
            for p, probe in enumerate(probes):
                s = model.observe(probe, z[:, p, :])
                pa, sing_a = estimators.aoa_batch(scenario, s)
                pw, sing_w = estimators.waoa_batch(scenario, s)
                err[:, mi, p, 0] = np.linalg.norm(np.where(sing_a[:, None], np.inf, pa) - probe, axis=1)
                err[:, mi, p, 1] = np.linalg.norm(np.where(sing_w[:, None], np.inf, pw) - probe, axis=1)
                conv[:, mi, p, 0] = ~sing_a
                conv[:, mi, p, 1] = ~sing_w
                rss = _locate_all(scenario, s, starts[:, p, :], params, params.epsilon_m, params.i_max)
                for qi, method in enumerate(RSS_METHODS, start=2):
                    res = rss[method]
                    err[:, mi, p, qi] = np.linalg.norm(res.positions - probe, axis=1)
                    its[:, mi, p, qi] = res.iterations
                    conv[:, mi, p, qi] = res.converged
        return {"err": err, "its": its, "conv": conv}

    parts = _run_chunked(worker, reals, sim.experiment.threads)
    err = np.concatenate([p["err"] for p in parts])
    its = np.concatenate([p["its"] for p in parts])
    conv = np.concatenate([p["conv"] for p in parts])
    err = np.vectorize(_quantize)(np.where(np.isfinite(err), err, np.inf))

    rows, summary = [], []
    plot = {
        "modes": modes, "methods": ALL_METHODS, "probes": probes,
        "mean_err": {}, "mean_iters": {}, "conv": {},
    }
    summary.append("positions table: mean error [mm] / mean iterations (converged runs)")
    for mi, mode in enumerate(modes):
        for p, probe in enumerate(probes):
            for qi, method in enumerate(ALL_METHODS):
                ok = conv[:, mi, p, qi]
                group_err = err[ok, mi, p, qi]
                group_rmse = _rmse(group_err)
                for r in range(reals):
                    rows.append([
                        "table2", mode, method, probe[0], probe[1], probe[2],
                        r, seed,
                        err[r, mi, p, qi] if np.isfinite(err[r, mi, p, qi]) else "",
                        int(its[r, mi, p, qi]), bool(conv[r, mi, p, qi]), group_rmse,
                    ])
                mean_err = float(np.mean(group_err)) if group_err.size else float("nan")
                mean_it = float(np.mean(its[ok, mi, p, qi])) if ok.any() else float("nan")
                plot["mean_err"][(mode, method, p)] = mean_err
                plot["mean_iters"][(mode, method, p)] = mean_it
                plot["conv"][(mode, method, p)] = float(ok.mean())
                summary.append(
                    f"  {mode} probe{p + 1} {method:9s} err {1e3 * mean_err:10.3f} mm"
                    f"  iters {mean_it:6.1f}  conv {ok.mean():.3f}"
                )
    return ExperimentResult("table2", list(METRIC_FIELDS), rows, summary, plot)


# ---------------------------------------------------------------------------
# convergence statistics over random receiver positions
# ---------------------------------------------------------------------------


def run_convergence_stats(sim: SimConfig) -> ExperimentResult:
    """Convergence rate, RMSE and iteration count of the RSS-based locators.

    Per realization the draws are: the true position (x, y uniform over the
    floor plan, z uniform up to the configured ceiling), the observation
    noise vector, then the uniform random start point.
    """
    scenario = sim.build_scenario()
    mk = scenario.num_leds
    modes = sim.modes()
    models = {m: ObservationModel.create(sim, m, scenario) for m in modes}
    params = sim.estimator
    seed, reals = sim.experiment.base_seed, sim.experiment.realizations
    hi = np.array([scenario.room_dims[0], scenario.room_dims[1], sim.experiment.z_max_m])

    def worker(r0: int, r1: int) -> dict:
        n = r1 - r0
        pos = np.empty((n, 3))
        z = np.empty((n, mk))
        starts = np.empty((n, 3))
        for i, r in enumerate(range(r0, r1)):
            rng = realization_rng(seed, r)
            pos[i] = rng.uniform(np.zeros(3), hi)
            z[i] = rng.normal(0.0, 1.0, mk)
            starts[i] = rng.uniform(np.zeros(3), scenario.room_dims)
        err = np.empty((n, len(modes), len(RSS_METHODS)))
        its = np.zeros_like(err, dtype=int)
        conv = np.zeros(err.shape, dtype=bool)
        for mi, mode in enumerate(modes):
            s = models[mode].observe(pos, z)
            rss = _locate_all(scenario, s, starts, params, params.epsilon_m, params.i_max)
            for qi, method in enumerate(RSS_METHODS):
                res = rss[method]
                err[:, mi, qi] = np.linalg.norm(res.positions - pos, axis=1)
                its[:, mi, qi] = res.iterations
                conv[:, mi, qi] = res.converged
        return {"pos": pos, "err": err, "its": its, "conv": conv}

    parts = _run_chunked(worker, reals, sim.experiment.threads)
    pos = np.concatenate([p["pos"] for p in parts])
    err = np.vectorize(_quantize)(np.concatenate([p["err"] for p in parts]))
    its = np.concatenate([p["its"] for p in parts])
    conv = np.concatenate([p["conv"] for p in parts])

    rows, summary = [], []
    plot = {"modes": modes, "methods": RSS_METHODS, "stats": {}}
    summary.append("convergence statistics (RMSE over converged runs)")
    for mi, mode in enumerate(modes):
        for qi, method in enumerate(RSS_METHODS):
            ok = conv[:, mi, qi]
            group_rmse = _rmse(err[ok, mi, qi])
            for r in range(reals):
                rows.append([
                    "converge", mode, method, pos[r, 0], pos[r, 1], pos[r, 2],
                    r, seed, err[r, mi, qi], int(its[r, mi, qi]),
                    bool(conv[r, mi, qi]), group_rmse,
                ])
            pct = float(ok.mean())
            mean_it = float(np.mean(its[ok, mi, qi])) if ok.any() else float("nan")
            plot["stats"][(mode, method)] = (pct, group_rmse, mean_it)
            summary.append(
                f"  {mode} {method:9s} conv {100 * pct:6.2f}%  rmse "
                f"{1e3 * group_rmse:9.3f} mm  iters {mean_it:6.1f}"
            )
    return ExperimentResult("converge", list(METRIC_FIELDS), rows, summary, plot)


# ---------------------------------------------------------------------------
# RMSE surface over horizontal planes
# ---------------------------------------------------------------------------


def plane_grid(sim: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Survey nodes: pitch grid inset half a pitch from the walls, x-major."""
    pitch = sim.experiment.pitch_m
    lx, ly, _ = sim.scenario.room_dims
    xs = np.arange(pitch / 2.0, lx, pitch)
    ys = np.arange(pitch / 2.0, ly, pitch)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return gx.ravel(), gy.ravel()


def region_masks(sim: SimConfig, xs: np.ndarray, ys: np.ndarray):
    """Central block (middle half of each dimension) and 1 m corner squares."""
    lx, ly, _ = sim.scenario.room_dims
    central = (
        (xs >= lx / 4) & (xs <= 3 * lx / 4) & (ys >= ly / 4) & (ys <= 3 * ly / 4)
    )
    corner = (np.minimum(xs, lx - xs) <= 1.0) & (np.minimum(ys, ly - ys) <= 1.0)
    return central, corner


def run_rmse_surface(sim: SimConfig, planes=None, modes=None) -> ExperimentResult:
    """Hybrid-locator RMSE on a pitch grid, fixed iteration budget.

    Per realization the draws are one standard normal block per plane (in
    config order, node-major); both modes reuse them.
    """
    scenario = sim.build_scenario()
    mk = scenario.num_leds
    modes = tuple(modes) if modes else sim.modes()
    models = {m: ObservationModel.create(sim, m, scenario) for m in modes}
    planes = tuple(planes) if planes else tuple(sim.experiment.plane_heights_m)
    xs, ys = plane_grid(sim)
    n_nodes = xs.size
    iters = sim.experiment.surface_iterations
    seed, reals = sim.experiment.base_seed, sim.experiment.realizations
    nodes_by_plane = [
        np.stack([xs, ys, np.full(n_nodes, z)], axis=1) for z in planes
    ]

    def worker(r0: int, r1: int) -> dict:
        n = r1 - r0
        z = np.empty((n, len(planes), n_nodes, mk))
        for i, r in enumerate(range(r0, r1)):
            rng = realization_rng(seed, r)
            for pl in range(len(planes)):
                z[i, pl] = rng.normal(0.0, 1.0, (n_nodes, mk))
        err = np.empty((n, len(modes), len(planes), n_nodes))
        conv = np.zeros(err.shape, dtype=bool)
        for mi, mode in enumerate(modes):
            model = models[mode]
            for pl, nodes in enumerate(nodes_by_plane):
                flat_nodes = np.tile(nodes, (n, 1))
                s = model.observe(nodes, z[:, pl])
                res = estimators.locate_batch(
                    scenario,
                    s.reshape(n * n_nodes, mk),
                    start="waoa",  # these surveys evaluate the hybrid locator
                    eta=sim.estimator.eta,
                    eps=None,
                    i_max=iters,
                )
                err[:, mi, pl] = np.linalg.norm(
                    res.positions - flat_nodes, axis=1
                ).reshape(n, n_nodes)
                conv[:, mi, pl] = res.converged.reshape(n, n_nodes)
        return {"err": err, "conv": conv}

    parts = _run_chunked(worker, reals, sim.experiment.threads)
    err = np.vectorize(_quantize)(np.concatenate([p["err"] for p in parts]))
    conv = np.concatenate([p["conv"] for p in parts])

    central, corner = region_masks(sim, xs, ys)
    header = [
        "experiment", "mode", "plane_z", "node_x", "node_y", "node_z",
        "method", "realizations", "iterations", "converged_fraction",
        "rmse_m", "seed",
    ]
    rows, summary = [], []
    plot = {"modes": modes, "planes": planes, "xs": xs, "ys": ys, "rmse": {}, "pitch": sim.experiment.pitch_m}
    summary.append(f"rmse surface ({reals} realizations, {iters} fixed iterations)")
    for mi, mode in enumerate(modes):
        for pl, z_plane in enumerate(planes):
            node_rmse = np.sqrt(np.mean(np.square(err[:, mi, pl, :]), axis=0))
            node_conv = conv[:, mi, pl, :].mean(axis=0)
            for ni in range(n_nodes):
                rows.append([
                    "surface", mode, z_plane, xs[ni], ys[ni], z_plane,
                    "waoa+rss", reals, iters, float(node_conv[ni]),
                    _quantize(float(node_rmse[ni])), seed,
                ])
            plot["rmse"][(mode, pl)] = node_rmse
            summary.append(
                f"  {mode} z={z_plane:<4g} plane-mean {1e3 * node_rmse.mean():8.3f} mm"
                f"  central {1e3 * node_rmse[central].mean():8.3f} mm"
                f"  corner {1e3 * node_rmse[corner].mean():8.3f} mm"
            )
    return ExperimentResult("surface", header, rows, summary, plot)


# ---------------------------------------------------------------------------
# RMSE versus fixed noise power
# ---------------------------------------------------------------------------


def noise_grid(sim: SimConfig) -> np.ndarray:
    e = sim.experiment
    return np.logspace(
        np.log10(e.noise_min_a2), np.log10(e.noise_max_a2), e.noise_points
    )


def run_noise_sweep(sim: SimConfig, modes=None) -> ExperimentResult:
    """Plane-mean RMSE against a fixed photocurrent noise variance.

    Per realization the draws are, per plane in config order: a uniform
    (x, y) position on the plane, then the observation noise vector. The
    same draws are reused at every sweep point and mode. Errors are clamped
    at the room diagonal, so diverged runs count as room-sized misses.
    """
    scenario = sim.build_scenario()
    mk = scenario.num_leds
    modes = tuple(modes) if modes else sim.modes()
    models = {m: ObservationModel.create(sim, m, scenario) for m in modes}
    planes = tuple(sim.experiment.plane_heights_m)
    grid = noise_grid(sim)
    iters = sim.experiment.surface_iterations
    seed, reals = sim.experiment.base_seed, sim.experiment.realizations
    lx, ly, _ = scenario.room_dims
    diag = float(np.linalg.norm(scenario.room_dims))

    def worker(r0: int, r1: int) -> dict:
        n = r1 - r0
        pos = np.empty((n, len(planes), 3))
        z = np.empty((n, len(planes), mk))
        for i, r in enumerate(range(r0, r1)):
            rng = realization_rng(seed, r)
            for pl, zp in enumerate(planes):
                xy = rng.uniform((0.0, 0.0), (lx, ly))
                pos[i, pl] = (xy[0], xy[1], zp)
                z[i, pl] = rng.normal(0.0, 1.0, mk)
        err = np.empty((n, len(modes), len(grid), len(planes)))
        conv = np.zeros(err.shape, dtype=bool)
        for mi, mode in enumerate(modes):
            model = models[mode]
            for pl in range(len(planes)):
                gains = model.gains(pos[:, pl, :])
                for gi, sigma2 in enumerate(grid):
                    sig = model.sigma_omega_fixed(float(sigma2))
                    s = gains + sig * z[:, pl, :]
                    res = estimators.locate_batch(
                        scenario, s,
                        start="waoa",
                        eta=sim.estimator.eta,
                        eps=None,
                        i_max=iters,
                    )
                    e = np.linalg.norm(res.positions - pos[:, pl, :], axis=1)
                    err[:, mi, gi, pl] = np.minimum(e, diag)
                    conv[:, mi, gi, pl] = res.converged
        return {"err": err, "conv": conv}

    parts = _run_chunked(worker, reals, sim.experiment.threads)
    err = np.concatenate([p["err"] for p in parts])
    conv = np.concatenate([p["conv"] for p in parts])

    header = [
        "experiment", "mode", "sigma2_n_a2", "plane_z", "method",
        "realizations", "iterations", "converged_fraction", "rmse_m", "seed",
    ]
    rows, summary = [], []
    plot = {"modes": modes, "grid": grid, "planes": planes, "rmse": {}}
    fit_lo, fit_hi = sim.experiment.noise_fit_min_a2, sim.experiment.noise_fit_max_a2
    summary.append("noise sweep (fixed total photocurrent noise variance)")
    for mi, mode in enumerate(modes):
        mean_rmse = np.empty(len(grid))
        for gi, sigma2 in enumerate(grid):
            plane_rmse = [
                _rmse(np.vectorize(_quantize)(err[:, mi, gi, pl])) for pl in range(len(planes))
            ]
            for pl, zp in enumerate(planes):
                rows.append([
                    "noise_sweep", mode, float(sigma2), zp, "waoa+rss",
                    reals, iters, float(conv[:, mi, gi, pl].mean()),
                    _quantize(plane_rmse[pl]), seed,
                ])
            mean_rmse[gi] = np.mean(plane_rmse)
        window = (grid >= fit_lo) & (grid <= fit_hi)
        slope = float(np.polyfit(np.log10(grid[window]), np.log10(mean_rmse[window]), 1)[0])
        plot["rmse"][mode] = mean_rmse
        plot.setdefault("slopes", {})[mode] = slope
        summary.append(
            f"  {mode}: log-log slope over [{fit_lo:g}, {fit_hi:g}] = {slope:.4f}"
        )
    return ExperimentResult("noise_sweep", header, rows, summary, plot)


# ---------------------------------------------------------------------------
# clipping-factor sweep: locator RMSE and channel capacity
# ---------------------------------------------------------------------------


def gamma_grid(sim: SimConfig) -> np.ndarray:
    e = sim.experiment
    return np.linspace(e.gamma_min, e.gamma_max, e.gamma_points)


def best_vap(scenario, gains: np.ndarray) -> int:
    """1-based index of the VAP with the largest summed gain."""
    per_vap = gains.reshape(scenario.vap_count, scenario.leds_per_vap).sum(axis=1)
    return int(per_vap.argmax()) + 1


def capacity_per_led(cfg, electric_gains_w: np.ndarray, sigma2_n: float, gamma: float):
    """Data capacity of each LED group of one VAP at clipping factor gamma."""
    return np.array([
        ofdm.channel_capacity(cfg, float(ge), sigma2_n, gamma) for ge in electric_gains_w
    ])


def run_clipping_sweep(sim: SimConfig) -> ExperimentResult:
    """Locator degradation and per-LED capacity against the clipping factor.

    Location-and-communication mode at the first probe position. Two RMSE
    columns per grid point:

      * ``rmse_m``: observation noise carries the analytic clipped-Gaussian
        distortion variance on top of the receiver noise,
        sigma_eff^2 = (sigma_n^2 + sigma_clip^2(gamma)) / 2, normalized by
        H(gamma) C_F(gamma) R_pd S_led;
      * ``rmse_chain_m``: measured through the full frame chain (clipping,
        superposition, per-sample noise, demodulation).

    Per realization the draws are: the analytic-model noise vector, the
    designated VAP's data symbols, then the per-sample chain noise. All
    sweep points share them. Errors clamp at the room diagonal.
    """
    scenario = sim.build_scenario()
    mk = scenario.num_leds
    model = ObservationModel.create(sim, "lcm", scenario)
    probe = np.asarray(sim.experiment.probe_positions[0], dtype=float)
    gains = model.gains(probe)
    sigma2_n = float(model.noise_variance_a2(probe, gains))
    noise_std = float(np.sqrt(sigma2_n))
    grid = gamma_grid(sim)
    params = sim.estimator
    seed, reals = sim.experiment.base_seed, sim.experiment.realizations
    diag = float(np.linalg.norm(scenario.room_dims))
    cfg_base = sim.ofdm_config("lcm")
    ctx = LinkContext.create(scenario, cfg_base, sim.led, probe)
    vap = best_vap(scenario, gains)
    ge_best = (
        model.conversion_w_per_a
        * gains.reshape(scenario.vap_count, scenario.leds_per_vap)[vap - 1]
        * scenario.receiver.responsivity_a_per_w
    )

    per_gamma = []
    for g in grid:
        cfg = cfg_base.with_gamma(float(g))
        h = ofdm.solve_h(cfg)
        c_f = ofdm.scaling_factor(float(g))
        s2_clip = ofdm.clipping_noise_variance(
            float(g), cfg.upper_current_a, cfg.lower_current_a
        )
        sig_eff = float(
            np.sqrt((sigma2_n + s2_clip) / 2.0)
            / (h * c_f * scenario.receiver.responsivity_a_per_w * model.conversion_w_per_a)
        )
        per_gamma.append((cfg, h, c_f, s2_clip, sig_eff))

    def worker(r0: int, r1: int) -> dict:
        n = r1 - r0
        err_model = np.empty((n, len(grid)))
        err_chain = np.empty((n, len(grid)))
        conv_model = np.zeros(err_model.shape, dtype=bool)
        conv_chain = np.zeros(err_model.shape, dtype=bool)
        s_model = np.empty((n, len(grid), mk))
        s_chain = np.empty((n, len(grid), mk))
        for i, r in enumerate(range(r0, r1)):
            rng = realization_rng(seed, r)
            z = rng.normal(0.0, 1.0, mk)
            unit = ctx.unit_group_signals(rng)
            tnoise = rng.normal(0.0, noise_std, cfg_base.size)
            for gi, (cfg, h, c_f, _s2, sig_eff) in enumerate(per_gamma):
                s_model[i, gi] = gains + sig_eff * z
                obs = ctx.receive(unit, tnoise, h_gain=h, scaling=c_f)
                s_chain[i, gi] = obs.values
        for gi in range(len(grid)):
            for s_all, err, conv in (
                (s_model, err_model, conv_model),
                (s_chain, err_chain, conv_chain),
            ):
                res = estimators.locate_batch(
                    scenario, s_all[:, gi, :],
                    start="waoa", eta=params.eta,
                    eps=params.epsilon_m, i_max=params.i_max,
                )
                e = np.linalg.norm(res.positions - probe, axis=1)
                err[:, gi] = np.minimum(e, diag)
                conv[:, gi] = res.converged
        return {
            "err_model": err_model, "err_chain": err_chain,
            "conv_model": conv_model, "conv_chain": conv_chain,
        }

    parts = _run_chunked(worker, reals, sim.experiment.threads)
    err_model = np.vectorize(_quantize)(np.concatenate([p["err_model"] for p in parts]))
    err_chain = np.vectorize(_quantize)(np.concatenate([p["err_chain"] for p in parts]))
    conv_model = np.concatenate([p["conv_model"] for p in parts])
    conv_chain = np.concatenate([p["conv_chain"] for p in parts])

    m_count = scenario.leds_per_vap
    header = (
        ["experiment", "mode", "gamma", "realizations", "rmse_m", "rmse_converged_m",
         "converged_fraction", "rmse_chain_m", "chain_converged_fraction",
         "h_gain", "c_f", "sigma2_clip_a2", "best_vap", "capacity_sum_bps"]
        + [f"capacity_m{m}_bps" for m in range(1, m_count + 1)]
        + ["seed"]
    )
    rows = []
    cap_sums = np.empty(len(grid))
    for gi, g in enumerate(grid):
        cfg, h, c_f, s2_clip, _ = per_gamma[gi]
        caps = capacity_per_led(cfg_base, ge_best, sigma2_n, float(g))
        cap_sums[gi] = caps.sum()
        ok = conv_model[:, gi]
        rows.append(
            ["clip_sweep", "lcm", float(g), reals,
             _rmse(err_model[:, gi]),
             _rmse(err_model[ok, gi]) if ok.any() else "",
             float(ok.mean()),
             _rmse(err_chain[:, gi]),
             float(conv_chain[:, gi].mean()),
             h, c_f, s2_clip, vap, float(caps.sum())]
            + [float(c) for c in caps]
            + [seed]
        )

    # capacity optimum from a fine analytic grid (independent of the sweep pitch)
    fine = np.arange(sim.experiment.gamma_min, sim.experiment.gamma_max + 1e-9, 0.02)
    fine_caps = np.array([
        capacity_per_led(cfg_base, ge_best, sigma2_n, float(g)).sum() for g in fine
    ])
    g_opt = float(fine[fine_caps.argmax()])
    cap_opt = float(fine_caps.max())

    summary = [
        "clipping sweep (LCM, probe 1)",
        f"  capacity-optimal clipping factor: {g_opt:.2f}"
        f"  (summed best-VAP capacity {cap_opt / 1e6:.1f} Mbit/s)",
    ]
    rmse_by_gamma = {float(g): _rmse(err_model[:, gi]) for gi, g in enumerate(grid)}
    plot = {
        "grid": grid, "rmse_model": np.array([rmse_by_gamma[float(g)] for g in grid]),
        "rmse_chain": np.array([_rmse(err_chain[:, gi]) for gi in range(len(grid))]),
        "capacity": cap_sums, "fine": fine, "fine_caps": fine_caps,
        "gamma_opt": g_opt, "capacity_opt": cap_opt,
    }
    return ExperimentResult("clip_sweep", header, rows, summary, plot)


# ---------------------------------------------------------------------------
# complexity report
# ---------------------------------------------------------------------------


def run_complexity_report(sim: SimConfig) -> ExperimentResult:
    """Closed-form operation counts plus counters read off instrumented runs."""
    scenario = sim.build_scenario()
    k_now, m_now = scenario.vap_count, scenario.leds_per_vap
    n_l = scenario.lambertian_mode

    header = [
        "experiment", "kind", "method", "vap_count", "leds_per_vap",
        "lambertian_mode", "iterations", "operations", "ratio_to_waoa",
    ]
    rows = []
    waoa_now = estimators.op_count("waoa", k_now)
    for k in range(1, 9):
        rows.append(["complexity", "closed_form", "aoa", k, "", "", "",
                     estimators.op_count("aoa", k), ""])
        rows.append(["complexity", "closed_form", "waoa", k, "", "", "",
                     estimators.op_count("waoa", k), ""])
    for nl in (1, 2, 5, 10, 20, 50):
        per_iter = estimators.op_count("rss", k_now, m_now, nl, 1)
        rows.append(["complexity", "closed_form", "rss_per_iteration", k_now, m_now,
                     nl, 1, per_iter, float(per_iter) / waoa_now])

    # instrumented runs on a noise-free observation at the configured receiver
    gains = channel.gain_vector(scenario, scenario.receiver.position)
    xi = estimators.select_strongest_values(gains, m_now, k_now)
    counter = estimators.OpCounter()
    estimators.aoa_estimate(scenario, xi, counter=counter)
    aoa_ops = counter.as_int()
    counter = estimators.OpCounter()
    estimators.waoa_estimate(scenario, gains, xi, counter=counter)
    waoa_ops = counter.as_int()
    report = estimators.hybrid_locate(
        scenario, gains,
        eta=sim.estimator.eta, eps=sim.estimator.epsilon_m, i_max=sim.estimator.i_max,
    )
    rss_ops = report.operation_count - waoa_ops
    per_iter = estimators.op_count("rss", k_now, m_now, n_l, 1)
    rows.append(["complexity", "instrumented", "aoa", k_now, m_now, n_l, "", aoa_ops, ""])
    rows.append(["complexity", "instrumented", "waoa", k_now, m_now, n_l, "", waoa_ops, ""])
    rows.append(["complexity", "instrumented", "rss", k_now, m_now, n_l,
                 report.iterations, rss_ops, float(per_iter) / waoa_ops])

    summary = [
        "complexity report",
        f"  closed forms at defaults: aoa {estimators.op_count('aoa', k_now)}, "
        f"waoa {waoa_now}, rss/iteration {per_iter}",
        f"  instrumented: aoa {aoa_ops}, waoa {waoa_ops}, "
        f"rss {rss_ops} over {report.iterations} iterations",
        f"  rss-iteration/waoa ratio: {float(per_iter) / waoa_now:.3f}",
    ]
    plot = {"k_range": np.arange(1, 9), "per_iter": per_iter, "waoa": waoa_now}
    return ExperimentResult("complexity", header, rows, summary, plot)
