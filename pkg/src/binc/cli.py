"""Command-line entry point.

Verbs: run (execute a scenario and write metrics/events/summary/
snapshots), validate (check a config file), sweep (seed x size grid),
dump-packet (annotated hex of an encoded message).

Exit codes: 0 success, 1 invalid configuration or usage, 2 runtime
failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from .core import ConfigError, SimParams, parse_config, validate_config
from . import engine, wire


class _Parser(argparse.ArgumentParser):
    # unknown flags must exit 1, not argparse's default 2
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="binc", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="execute one scenario")
    _add_run_flags(run)
    run.add_argument("--out", required=True, help="output directory")

    val = sub.add_parser("validate", help="validate a configuration file")
    val.add_argument("--config", required=True)

    sweep = sub.add_parser("sweep", help="run a seed x size grid")
    _add_run_flags(sweep)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--seeds", type=int, default=1,
                       help="number of seeds per size (seed, seed+1, ...)")

    dump = sub.add_parser("dump-packet", help="decode and pretty-print hex")
    dump.add_argument("--hex", required=True, help="encoded message as hex")
    return parser


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="flat key = value file")
    p.add_argument("--scenario", choices=("straight", "obstacle"),
                   default="straight")
    p.add_argument("--n", default=None,
                   help="node count (sweep: comma-separated list)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=600.0, help="seconds")
    p.add_argument("--controller", choices=engine.CONTROLLERS, default="binc")
    p.add_argument("--router", choices=engine.ROUTERS, default="binc")
    p.add_argument("--snapshot-every", type=float, default=10.0,
                   help="seconds between snapshot records (0 disables)")
    p.add_argument("--eq14-verbatim", action="store_true",
                   help="use the published log force form (inverted ratios)")
    p.add_argument("--eq18-verbatim", action="store_true",
                   help="compare the raw 1/m indicator against the threshold")
    p.add_argument("--header-bytes", type=int, default=0,
                   help="extra per-transmission bytes charged in metrics")
    p.add_argument("--probe", nargs=3, metavar=("SRC", "DST", "PERIOD"),
                   default=None, help="inject unicast probes")
    p.add_argument("--course-scale", type=float, default=1.0,
                   help="obstacle scenario course scale factor")
    p.add_argument("--spawn-side", type=float, default=None,
                   help="override the spawn square side (m)")
    p.add_argument("--random-headings", action="store_true",
                   help="start with random velocities instead of zero")
    p.add_argument("--window", type=float, default=10.0,
                   help="overhead bps window (s)")


def _load_params(args, n_override: Optional[int] = None) -> SimParams:
    params = SimParams()
    if args.config:
        with open(args.config) as fh:
            params = parse_config(fh.read())
    updates = {}
    n = n_override if n_override is not None else (
        int(args.n) if args.n is not None else None)
    if n is not None:
        updates["n_uavs"] = n
    if args.seed is not None:
        updates["seed"] = args.seed
    if updates:
        from dataclasses import replace
        params = replace(params, **updates)
    return validate_config(params)


def _make_scenario(args, params: SimParams) -> engine.Scenario:
    if args.scenario == "obstacle":
        return engine.obstacle_avoidance(
            params.n_uavs, course_scale=args.course_scale,
            spawn_side=args.spawn_side, random_headings=args.random_headings)
    return engine.straight_sailing(
        params.n_uavs, spawn_side=args.spawn_side,
        random_headings=args.random_headings)


def _run_one(args, params: SimParams, out_dir: str) -> engine.RunReport:
    scenario = _make_scenario(args, params)
    probe = None
    if args.probe is not None:
        probe = (int(args.probe[0]), int(args.probe[1]), float(args.probe[2]))
    return engine.run(
        params, scenario, duration_s=args.duration, seed=params.seed,
        out_dir=out_dir, controller=args.controller, router=args.router,
        snapshot_every_s=args.snapshot_every, header_bytes=args.header_bytes,
        window_s=args.window, eq14_verbatim=args.eq14_verbatim,
        eq18_verbatim=args.eq18_verbatim, probe=probe)


def _cmd_run(args) -> int:
    params = _load_params(args)
    report = _run_one(args, params, args.out)
    print(f"wrote {args.out} ({report.summary['ticks']} ticks, "
          f"{report.wall_time_s:.1f}s wall)")
    return 0


def _cmd_validate(args) -> int:
    try:
        with open(args.config) as fh:
            params = parse_config(fh.read())
        validate_config(params)
    except ConfigError as e:
        for v in e.violations:
            print(v, file=sys.stderr)
        return 1
    print("ok")
    return 0


def _cmd_sweep(args) -> int:
    if args.n is None:
        print("error: sweep requires --n", file=sys.stderr)
        return 1
    sizes = [int(x) for x in str(args.n).split(",") if x.strip()]
    base_seed = args.seed if args.seed is not None else 0
    for n in sizes:
        for k in range(args.seeds):
            seed = base_seed + k
            params = _load_params(args, n_override=n)
            from dataclasses import replace
            params = replace(params, seed=seed)
            cell = os.path.join(args.out, f"n{n}_seed{seed}")
            _run_one(args, params, cell)
            print(f"wrote {cell}")
    return 0


def _cmd_dump(args) -> int:
    try:
        data = bytes.fromhex(args.hex.replace(" ", ""))
    except ValueError:
        print("error: not valid hex", file=sys.stderr)
        return 2
    print(wire.annotate(data))
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.verb == "run":
            return _cmd_run(args)
        if args.verb == "validate":
            return _cmd_validate(args)
        if args.verb == "sweep":
            return _cmd_sweep(args)
        if args.verb == "dump-packet":
            return _cmd_dump(args)
        return 1
    except ConfigError as e:
        for v in e.violations:
            print(v, file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except engine.SinkFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (wire.MalformedPacket, wire.RangeViolation) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
