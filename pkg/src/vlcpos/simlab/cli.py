"""Command line interface.

    vlcpos scenario validate [--config FILE]
    vlcpos table2      [common flags]
    vlcpos converge    [common flags] [--mode lom|lcm|both]
    vlcpos surface     [common flags] [--mode lom|lcm|both]
    vlcpos noise-sweep [common flags] [--mode lom|lcm|both]
    vlcpos clip-sweep  [common flags]
    vlcpos complexity  [common flags]

Common flags: --config FILE, --seed N, --realizations N, --threads N,
--out FILE, --plot/--no-plot. Experiments write a CSV to --out and, unless
--no-plot, a PNG figure next to it. Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .. import channel, frontend
from ..errors import ConfigError, DomainError, SingularSystemError
from . import experiments, plots
from .config import SimConfig, default_config, load_config
from .io import write_csv
from .observations import ObservationModel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(parser: argparse.ArgumentParser, with_mode: bool = False) -> None:
    parser.add_argument("--config", type=Path, default=None, help="INI configuration file")
    parser.add_argument("--seed", type=int, default=None, help="base seed override")
    parser.add_argument("--realizations", type=int, default=None, help="realization count override")
    parser.add_argument("--threads", type=int, default=None, help="worker thread count")
    parser.add_argument("--out", type=Path, default=None, help="output CSV path")
    parser.add_argument("--plot", dest="plot", action="store_true", default=True,
                        help="render a PNG figure next to the CSV (default)")
    parser.add_argument("--no-plot", dest="plot", action="store_false")
    if with_mode:
        parser.add_argument("--mode", choices=("lom", "lcm", "both"), default=None,
                            help="operation mode (default from config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlcpos",
        description="Indoor visible-light 3-D positioning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scenario = sub.add_parser("scenario", help="scene inspection")
    scenario_sub = scenario.add_subparsers(dest="subcommand", required=True)
    validate = scenario_sub.add_parser("validate", help="build the scene and print derived constants")
    validate.add_argument("--config", type=Path, default=None)

    for name, with_mode, help_text in (
        ("table2", False, "locator errors and iterations at the probe positions"),
        ("converge", True, "convergence statistics over random positions"),
        ("surface", True, "RMSE surface over horizontal planes"),
        ("noise-sweep", True, "plane-mean RMSE versus fixed noise power"),
        ("clip-sweep", False, "locator RMSE and capacity versus clipping factor"),
        ("complexity", False, "operation-count report"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p, with_mode)
    return parser


def _load(args) -> SimConfig:
    sim = load_config(args.config) if args.config else default_config()
    exp = sim.experiment
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["base_seed"] = args.seed
    if getattr(args, "realizations", None) is not None:
        changes["realizations"] = args.realizations
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    if getattr(args, "mode", None) is not None:
        changes["mode"] = args.mode
    if changes:
        sim = dataclasses.replace(sim, experiment=dataclasses.replace(exp, **changes))
    return sim


def _validate_scenario(args) -> int:
    sim = load_config(args.config) if args.config else default_config()
    scenario = sim.build_scenario()
    s_led = frontend.led_conversion_factor(sim.led)
    gm = channel.gain_matrix(scenario)
    p_r = channel.total_received_power(gm, sim.transmit_power_w())
    nv = frontend.noise_variances(sim.noise, scenario.receiver, p_r)
    print(f"room {scenario.room_dims} m, {scenario.vap_count} VAPs x "
          f"{scenario.leds_per_vap} LEDs, receiver at {scenario.receiver.position}")
    print(f"led conversion factor: {s_led:.6g} W/A")
    print(f"transmit power per LED: {sim.transmit_power_w():.6g} W")
    print(f"noise variances [A^2]: background {nv.background:.6g}, "
          f"received-signal {nv.received_signal:.6g}, dark {nv.dark_current:.6g}")
    print(f"thermal [A^2]: feedback {nv.thermal_feedback:.6g}, "
          f"fet {nv.thermal_fet:.6g}, total {nv.thermal:.6g}")
    print(f"total noise variance: {nv.total:.6g} A^2")
    for mode in ("lom", "lcm"):
        cfg = sim.ofdm_config(mode)
        model = ObservationModel.create(sim, mode, scenario)
        pilot = cfg.pilot_bin(1, 1)
        print(f"{mode}: H {model.h_gain:.6g}, C_F {model.scaling:.9g}, "
              f"sigma_omega {float(model.sigma_omega(scenario.receiver.position)):.6g}, "
              f"data capacity {cfg.data_capacity}, first pilot bin {pilot}")
    # geometry sanity: every LED normal sits on the configured cone
    cone = np.cos(scenario.alpha_rad)
    for k0 in range(scenario.vap_count):
        axis_leds = scenario.led_normals[k0 * scenario.leds_per_vap:(k0 + 1) * scenario.leds_per_vap]
        axis = axis_leds.mean(axis=0)
        axis /= np.linalg.norm(axis)
        err = np.abs(axis_leds @ axis - cone).max()
        if err > 1e-9:
            raise DomainError(f"LED cone deviates from alpha by {err:.2e}")
    print("scenario valid")
    return EXIT_OK


_RUNNERS = {
    "table2": lambda sim: experiments.run_positions_table(sim),
    "converge": lambda sim: experiments.run_convergence_stats(sim),
    "surface": lambda sim: experiments.run_rmse_surface(sim),
    "noise-sweep": lambda sim: experiments.run_noise_sweep(sim),
    "clip-sweep": lambda sim: experiments.run_clipping_sweep(sim),
    "complexity": lambda sim: experiments.run_complexity_report(sim),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scenario":
            return _validate_scenario(args)
        sim = _load(args)
        result = _RUNNERS[args.command](sim)
        result.print_summary()
        out = args.out if args.out else Path(f"{result.name}.csv")
        write_csv(out, result.header, result.rows)
        print(f"wrote {out}")
        if args.plot:
            figure = plots.render(result, out.with_suffix(".png"))
            print(f"wrote {figure}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, SingularSystemError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
