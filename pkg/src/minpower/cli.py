"""Command line entry point: ``minpower <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import asympt, exact, harness
from .config import ConfigError, config_from_dict, read_config

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_DEFAULTS = {
    "sweep-rate": {"sweep": "rate", "grid": {"start": 0.1, "stop": 5.0, "num": 15}},
    "sweep-antennas": {"sweep": "antennas", "grid": [8, 10, 12, 16, 20, 24, 32, 48, 64],
                       "rate": [2, 3]},
    "validate": {"sweep": "rate", "grid": [0.0], "rate": [2, 3]},
    "single": {"sweep": "rate", "grid": [0.0], "rate": [2, 3]},
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minpower", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("sweep-rate", "average power vs. per-user rate"),
        ("sweep-antennas", "average power vs. antenna count"),
        ("validate", "rate accuracy and large-system convergence report"),
        ("single", "one channel draw; print multipliers, powers and SINRs"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="YAML experiment file")
        s.add_argument("--seed", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("--schemes", type=lambda v: tuple(x.strip() for x in v.split(",") if x.strip()),
                       help="comma separated subset of " + ",".join(harness.SCHEMES))
        s.add_argument("--freeze-positions", action="store_true", default=None)
        s.add_argument("--workers", type=int)
        if name.startswith("sweep"):
            s.add_argument("--out", help="CSV output path")
            s.add_argument("--plot", help="SVG/PDF plot output path")
    return p


def _config(args) -> harness.ExperimentConfig:
    overrides = dict(seed=args.seed, trials=args.trials, schemes=args.schemes,
                     freeze_positions=args.freeze_positions, workers=args.workers)
    data = dict(_DEFAULTS[args.command])
    if args.config:
        given = read_config(args.config)
        if given.get("sweep", data["sweep"]) != data["sweep"]:
            # a grid meant for the other sweep variable is meaningless here
            given.pop("grid", None)
        data.update(given)
    # the subcommand decides the sweep variable
    data["sweep"] = _DEFAULTS[args.command]["sweep"]
    return config_from_dict(data, **overrides)


def _fmt(v) -> str:
    return np.array2string(np.asarray(v), precision=5, max_line_width=120)


def _single(cfg: harness.ExperimentConfig) -> int:
    sc = cfg.system
    ch = harness.draw_instance(cfg, 0, sc.N)
    print(f"N={sc.N} K={sc.K} sigma2={sc.sigma2:.4e} W seed={cfg.seed}")
    print(f"rates   {_fmt(ch.rates)}")
    print(f"gamma   {_fmt(ch.gamma)}")
    print(f"l(x)    {_fmt(ch.attenuation)}")
    t1 = asympt.optimal_equivalents(ch.users, sc.sigma2, sc.N)
    print(f"lambda_bar {_fmt(t1.lambda_bar)}  P_bar {t1.P_bar:.6e} W")
    for scheme in cfg.schemes:
        try:
            sol = harness.precode(scheme, ch, sc.sigma2, cfg.solver)
        except exact.ConvergenceError as exc:
            print(f"[{scheme}] solver diverged: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        except exact.PrecoderError as exc:
            print(f"[{scheme}] infeasible: {exc}")
            continue
        print(f"[{scheme}] P = {sol.total_power:.6e} W")
        if sol.lam is not None:
            print(f"  lambda {_fmt(sol.lam)}")
        print(f"  p      {_fmt(sol.p)}")
        print(f"  SINR   {_fmt(sol.sinr)}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "single":
        return _single(cfg)
    if args.command == "validate":
        report = harness.validate(cfg)
        print("\n".join(report.lines()))
        return 0

    table = harness.run_sweep(cfg)
    for r in table.rows:
        print(f"{r.sweep_param}={r.value:<8.4g} {r.scheme:<7} {r.avg_power_watt:.4e} W "
              f"(std {r.std_power_watt:.2e}, {r.trials} ok, {r.infeasible} infeasible)")
    try:
        if args.out:
            harness.write_csv(table, args.out)
        if args.plot:
            harness.emit_plot(table, args.plot)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
