"""Command-line interface: ``relayfbl {capacity,bounds,simulate,sweep,verify}``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .capacity import eps_capacity
from .core import ChannelParams
from .harness import (SWEEP_AXES, VERIFY_SUITES, bounds_csv, load_config, run_experiment,
                      sweep, verify_suite)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(float(v)) for v in text.split(",") if v.strip()]


def _u64(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def _channel_args(p: argparse.ArgumentParser, eps_required: bool) -> None:
    for name in ("p1", "p2", "n2", "n3"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--eps", type=float, required=eps_required, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayfbl",
        description="Finite-blocklength bounds and decode-forward simulation for the "
                    "Gaussian degraded relay channel. All rates are in nats.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="epsilon-capacity and optimal power split (JSON)")
    _channel_args(p, eps_required=False)

    p = sub.add_parser("bounds", help="achievability and converse bounds per n (CSV)")
    _channel_args(p, eps_required=True)
    p.add_argument("--n-grid", type=_ints, required=True, help="comma-separated blocklengths")

    p = sub.add_parser("simulate", help="Monte Carlo run of the coding scheme")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=_u64, help="overrides master_seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory for trials.csv and summary.json")
    p.add_argument("--exact-ci", action="store_true", help="Clopper-Pearson intervals for rates")

    p = sub.add_parser("sweep", help="simulate along one parameter axis (CSV)")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--grid", type=_floats, required=True)
    p.add_argument("--config", required=True)

    p = sub.add_parser("verify", help="run property probes (JSON report)")
    p.add_argument("--suite", choices=VERIFY_SUITES + ("all",), required=True)
    p.add_argument("--seed", type=_u64, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout
    if args.command == "capacity":
        ch = ChannelParams(args.p1, args.p2, args.n2, args.n3)
        res = eps_capacity(ch, args.eps)
        json.dump({"rate_nats": res.rate, "alpha_star": res.alpha_star.alpha,
                   "binding_side": res.binding_side.value}, out)
        out.write("\n")
    elif args.command == "bounds":
        ch = ChannelParams(args.p1, args.p2, args.n2, args.n3)
        out.write(bounds_csv(ch, args.eps, args.n_grid))
    elif args.command == "simulate":
        cfg = load_config(args.config)
        overrides = {k: v for k, v in (("trials", args.trials), ("master_seed", args.seed),
                                       ("workers", args.workers), ("output_path", args.out))
                     if v is not None}
        cfg = replace(cfg, **overrides)
        summary = run_experiment(cfg, "exact" if args.exact_ci else "normal")
        json.dump(summary.to_json(), out, indent=2, sort_keys=True)
        out.write("\n")
    elif args.command == "sweep":
        out.write(sweep(args.axis, args.grid, load_config(args.config)))
    elif args.command == "verify":
        report = verify_suite(args.suite, args.seed)
        json.dump(report, out, indent=2)
        out.write("\n")
        return 0 if report["pass"] else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
