"""
Command line front end: single runs, convergence sweeps and self checks.

    strangsplit list
    strangsplit run --problem quadratic1d --m 1 --scheme m5b --tau 0.005 --out state.txt
    strangsplit converge --problem quadratic1d --m 1 --schemes strang,m3,m5a,m5b --out report.csv
    strangsplit selftest

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..errors import ConfigError, NumericalFailure, SplittingError
from ..schemes import SCHEMES, SchemeConfig, integrate
from . import config as cfgfile
from . import selftest
from .convergence import emit_report, run_convergence
from .problems import builtin_problems

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--problem", choices=("quadratic1d", "integro1d", "stiff2d"))
    p.add_argument("--m", type=float, help="quadratic1d: f(u) = m u^2")
    p.add_argument("--M", type=float, help="stiff2d stiffness parameter")
    p.add_argument("--scale", choices=("desk", "paper"))
    p.add_argument("--n", type=int, help="interior nodes per axis")
    p.add_argument("--backend", choices=("auto", "dense", "krylov"))
    p.add_argument("--krylov-tol", dest="krylov_tol", type=float)
    p.add_argument("--reaction-substeps", dest="reaction_substeps", type=int)
    p.add_argument("--mg-cycles", dest="mg_cycles", type=int)
    p.add_argument("--mg-tol", dest="mg_tol", type=float)
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strangsplit", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("list", help="list problems and schemes")

    run = sub.add_parser("run", help="single integration; writes the final state")
    _common(run)
    run.add_argument("--scheme", default=None)
    run.add_argument("--tau", type=float)
    run.add_argument("--T", type=float)

    conv = sub.add_parser("converge", help="convergence sweep against an RK4 reference")
    _common(conv)
    conv.add_argument("--schemes", type=lambda v: [s for s in v.split(",") if s])
    conv.add_argument("--k-min", dest="k_min", type=int)
    conv.add_argument("--k-max", dest="k_max", type=int)
    conv.add_argument("--tau-ref", dest="tau_ref", type=float)
    conv.add_argument("--plotdata", help="also write plot data to this file")
    conv.add_argument("--allow-failed", action="store_true",
                      help="exit 0 even if some (scheme, tau) runs failed")

    sub.add_parser("selftest", help="run the quick oracle checks")
    return parser


def _options(args) -> dict:
    opts = cfgfile.load(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if key in cfgfile.KEYS and value is not None:
            opts[key] = value
    return opts


def cmd_list(args) -> int:
    print("problems:")
    for spec in builtin_problems("desk"):
        print(f"  {spec.label:22s} dim={spec.dim} T={spec.T:g} taus={spec.tau_base:g}*2^-k, "
              f"k={spec.k_range[0]}..{spec.k_range[1]}")
    print("schemes: " + ", ".join(SCHEMES))
    return EXIT_OK


def cmd_run(args) -> int:
    opts = _options(args)
    spec = cfgfile.build_problem(opts)
    problem = spec.discretize()
    scheme = opts.get("scheme", "m5b")
    tau = opts.get("tau", spec.tau_base)
    smoother = cfgfile.build_smoother(opts, spec)
    cfg = SchemeConfig(scheme, tau, spec.T, fused=opts.get("fused"),
                       ordering=opts.get("ordering", "reaction"),
                       reaction_substeps=opts.get("reaction_substeps", 5),
                       backend=cfgfile.build_backend(opts),
                       corrector=spec.corrector_rule(scheme, smoother, opts.get("m3_extension")))
    traj = integrate(problem, cfg)
    c = traj.counters
    print(f"{spec.label} {cfg.scheme} tau={tau:g} steps={cfg.steps} "
          f"diffusion_flows={c.diffusion} reaction_flows={c.reaction}")
    out = opts.get("out")
    if out:
        mesh = problem.grid.mesh()
        cols = [np.broadcast_to(x, problem.grid.shape).ravel() for x in mesh] + [traj.final.ravel()]
        header = " ".join(["x", "y"][:problem.grid.dim] + ["u"]) + f"  t={spec.T:g}"
        np.savetxt(out, np.column_stack(cols), fmt="%.16e", header=header)
    return EXIT_OK


def cmd_converge(args) -> int:
    opts = _options(args)
    spec = cfgfile.build_problem(opts)
    sweep = cfgfile.build_sweep(opts, spec)
    schemes = opts.get("schemes", ["strang", "m3", "m5a", "m5b"])
    report = run_convergence(spec, schemes, sweep)
    out = opts.get("out", "report.csv")
    emit_report(report, out, opts.get("format", "csv"))
    if opts.get("plotdata"):
        emit_report(report, opts["plotdata"], "plotdata")
    for scheme, slope in report.slopes.items():
        print(f"{scheme:7s} observed order {slope:.3f}")
    print(f"wrote {out}")
    if report.failed:
        for r in report.failed:
            print(f"failed: scheme={r.scheme} tau={r.tau:.6e}: {r.message}", file=sys.stderr)
        if not args.allow_failed:
            return EXIT_NUMERICAL
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = selftest.run()
    for name, passed, value in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({value})")
    return EXIT_OK if all(p for _, p, _ in results) else EXIT_NUMERICAL


COMMANDS = {"list": cmd_list, "run": cmd_run, "converge": cmd_converge, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"strangsplit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"strangsplit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SplittingError as exc:
        print(f"strangsplit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
