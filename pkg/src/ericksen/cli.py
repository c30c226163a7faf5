"""Command-line entry point ``ericksen-lc``.

Exit codes: 0 on success, 2 for configuration errors, 3 when the flow aborts.
"""
import argparse
import json
import os
import sys

from . import __version__
from .flow import FlowAbort
from .mesh import check_weak_acute
from .scenarios import (
    PRESETS,
    ConfigError,
    ScenarioConfig,
    build_mesh,
    eoc_run,
    load_config,
    run_scenario,
)

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3


def _load(target):
    if target in PRESETS and not os.path.exists(target):
        return ScenarioConfig.preset(target)
    return load_config(target)


def _parse_levels(text):
    try:
        levels = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad level list {text!r}") from None
    if not levels or min(levels) < 1:
        raise ConfigError("levels must be positive integers")
    return levels


def cmd_run(args):
    cfg = _load(args.config)
    if args.max_iters is not None:
        cfg = cfg.replace(**{"flow.max_iters": args.max_iters})

    def progress(k, state, rec):
        if not args.quiet and (k == 1 or k % args.every == 0):
            print(f"iter {k:5d}  E = {rec.energy.total:.10g}  "
                  f"|ds| = {rec.ds_l2:.3e}  |dn| = {rec.dn_l2:.3e}", flush=True)

    result = run_scenario(cfg, output_dir=args.output, progress=progress)
    d = result.defects
    print(f"{cfg.name}: {result.flow.iterations} iterations, "
          f"converged={result.flow.converged}, E = {result.flow.final_energy.total:.10g}")
    print(f"s in [{result.flow.state.s.min():.4f}, {result.flow.state.s.max():.4f}], "
          f"defect nodes {d.count}, components {d.n_components}")
    print(f"output written to {result.output_dir}")
    return EXIT_OK


def cmd_eoc(args):
    levels = _parse_levels(args.levels)

    def progress(rec):
        print(f"level {rec.level}: {rec.iterations} iterations, {rec.seconds:.1f} s",
              flush=True)

    report = eoc_run(levels, kappa=args.kappa, dt=args.dt, progress=progress)
    print(report.table(reference=args.kappa == 0.2))
    if args.json:
        data = {"levels": [{"level": r.level, "h": r.h, "errors": r.errors,
                            "iterations": r.iterations} for r in report.levels],
                "orders": report.orders}
        with open(args.json, "w") as fh:
            json.dump(data, fh, indent=2)
    return EXIT_OK


def cmd_check_mesh(args):
    cfg = _load(args.config)
    mesh = build_mesh(cfg)
    rep = check_weak_acute(mesh)
    print(f"{mesh.n_vertices} vertices, {mesh.n_cells} cells, h_max = {mesh.h_max():.5g}")
    print(f"weakly acute: {rep.passed} (largest off-diagonal stiffness entry "
          f"{rep.worst_offdiag:.3e})")
    return EXIT_OK if rep.passed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="ericksen-lc",
                                description="Ericksen liquid-crystal gradient-flow solver")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario from a config file or preset name")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides config)")
    r.add_argument("--max-iters", type=int)
    r.add_argument("--every", type=int, default=10, help="progress print interval")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eoc", help="plane-defect convergence study")
    e.add_argument("--levels", default="3,4,5")
    e.add_argument("--kappa", type=float, default=0.2)
    e.add_argument("--dt", type=float, default=1.0)
    e.add_argument("--json", help="also write the results as JSON")
    e.set_defaults(func=cmd_eoc)

    c = sub.add_parser("check-mesh", help="report weak acuteness of a scenario mesh")
    c.add_argument("config")
    c.set_defaults(func=cmd_check_mesh)

    v = sub.add_parser("version", help="print the package version")
    v.set_defaults(func=lambda args: print(__version__) or EXIT_OK)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlowAbort as exc:
        print(f"flow aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
