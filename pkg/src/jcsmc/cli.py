"""Command-line entry point: ``jcsmc <command> [options]``.

Exit codes: 0 success, 2 infeasible instance (single-run commands), 3
convergence failure, 4 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, ConvergenceFailure, InfeasibleSensing, InvalidArgument
from .scenario import ScenarioConfig, sample_channels

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONVERGENCE, EXIT_CONFIG = 0, 2, 3, 4

_SWEEPS = {"sweep-sinr": "sinr_db", "sweep-power": "power_dbm", "sweep-users": "users"}
_DEFAULT_GRIDS = {"sinr_db": "10:5:35", "power_dbm": "20:5:40", "users": "2:1:5"}


def _load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=int(args.seed))
    return cfg


def _common(p):
    p.add_argument("--config", help="YAML scenario file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="CSV output path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jcsmc", description="Joint sensing, communication and "
                                 "multi-tier computing optimiser and experiment harness.")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, helptext in (("partial", "solve one partial-offloading instance"),
                           ("binary", "solve one binary-offloading instance")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--trial", type=int, default=0, help="channel draw index")
        p.add_argument("--access", choices=("noma", "sdma"), default="noma")
        p.add_argument("--trace", help="write the iteration trace to this CSV")

    for name in _SWEEPS:
        p = sub.add_parser(name, help=f"Monte Carlo sweep over {_SWEEPS[name]}")
        _common(p)
        p.add_argument("--trials", type=int, default=10)
        p.add_argument("--scheme", default="noma-partial,noma-binary,bs-only,cs-only",
                       help="comma-separated scheme list")
        p.add_argument("--grid", help="start:step:stop or comma list")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--timing", action="store_true", help="add a wall-time column (not reproducible)")

    p = sub.add_parser("feasibility", help="probability of a sensing-feasible start")
    _common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--grid", default="20:1:40", help="gamma_min grid in dB")
    p.add_argument("--scheme", default="noma,sdma", help="access schemes")
    p.add_argument("--users", help="comma-separated user counts (default: config)")

    p = sub.add_parser("beampattern", help="normalised beampattern of a solved instance")
    _common(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--access", choices=("noma", "sdma"), default="noma")

    p = sub.add_parser("validate", help="closed-form identity and solver checks")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    return ap


def _single(args, cfg) -> int:
    from .binary import solve_binary
    from .experiments import write_solution_csv
    from .partial import solve_partial

    ch = sample_channels(cfg, args.trial)
    if args.command == "partial":
        sol = solve_partial(ch, cfg, access=args.access)
    else:
        sol = solve_binary(ch, cfg, access=args.access)
        if args.trace:
            sol.dump_trace(args.trace)
    if args.command == "partial" and args.trace:
        with open(args.trace, "w") as fh:
            fh.write("iteration,objective_bps\n")
            for n, v in enumerate(sol.trace, 1):
                fh.write(f"{n},{float(v)!r}\n")
    rec = sol.to_record()
    print(json.dumps({k: v for k, v in rec.items() if not k.endswith("trace_bps")}, indent=2))
    if args.out:
        write_solution_csv(sol, args.out)
    return EXIT_OK if sol.converged else EXIT_CONVERGENCE


def _sweep(args, cfg) -> int:
    from .experiments import SweepSpec, common_feasible_means, parse_grid, run_sweep

    param = _SWEEPS[args.command]
    schemes = tuple(s.strip() for s in args.scheme.split(",") if s.strip())
    spec = SweepSpec(parameter=param, values=parse_grid(args.grid or _DEFAULT_GRIDS[param]),
                     trials=args.trials, schemes=schemes, seed=cfg.seed, out=args.out, config=cfg,
                     workers=args.workers)
    rows = run_sweep(spec, with_timing=args.timing)
    means = common_feasible_means(rows, schemes)
    print(f"{param:>10} " + " ".join(f"{s:>14}" for s in schemes) + "  common")
    for value, entry in means.items():
        print(f"{value:>10g} " + " ".join(f"{entry[s] / 1e6:14.4f}" for s in schemes) + f"  {entry['_count']}")
    return EXIT_OK


def _feasibility(args, cfg) -> int:
    from .experiments import feasibility_study, parse_grid

    users = [int(v) for v in args.users.split(",")] if args.users else None
    accesses = tuple(s.strip() for s in args.scheme.split(",") if s.strip())
    for a in accesses:
        if a not in ("noma", "sdma"):
            raise InvalidArgument(f"feasibility schemes are noma and sdma, got {a!r}")
    rows = feasibility_study(cfg, parse_grid(args.grid), args.trials, user_counts=users,
                             accesses=accesses, out=args.out)
    for a, g, K, prob in rows:
        print(f"{a} gamma={g:g} dB K={K} probability={prob:.4f}")
    return EXIT_OK


def _beampattern(args, cfg) -> int:
    from .experiments import solved_beampattern, write_beampattern_csv
    from .partial import solve_partial

    ch = sample_channels(cfg, args.trial)
    sol = solve_partial(ch, cfg, access=args.access)
    angles, pattern = solved_beampattern(sol, ch, cfg)
    if args.out:
        write_beampattern_csv(angles, pattern, args.out)
    else:
        for th, v in zip(angles, pattern):
            print(f"{th:.6f} {v:.6e}")
    return EXIT_OK


def _validate(args) -> int:
    from .validation import identity_checks, solver_examples

    checks = identity_checks(args.trials, args.seed) + solver_examples()
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _validate(args)
        cfg = _load_config(args)
        if args.command in ("partial", "binary"):
            return _single(args, cfg)
        if args.command in _SWEEPS:
            return _sweep(args, cfg)
        if args.command == "feasibility":
            return _feasibility(args, cfg)
        return _beampattern(args, cfg)
    except (ConfigError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleSensing as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
