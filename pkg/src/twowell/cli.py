"""Command-line entry point: ``twowell <subcommand> ...``.

Exit codes: 0 on success, 2 for invalid input or usage, 3 when a solver stagnates.
"""

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .density import TwoWellDensity
from .energy import EnergyParams, energy_eval
from .errors import InvalidInputError, StageError, StagnationError, TwoWellError
from .grid import read_twg, write_twg

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_STAGNATION = 3


def _eps_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def _l_value(text):
    from .textconfig import fraction
    try:
        return fraction(text)
    except InvalidInputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_density(p):
    p.add_argument("--kappa", type=float, default=None, help="well separation (default 1)")
    p.add_argument("--c", type=float, default=None, help="density scale (default 1)")
    p.add_argument("--variant", choices=("hard-min", "smooth-harmonic"), default=None)


def _density(args, d=2):
    base = getattr(args, "_density_defaults", {})
    kappa = args.kappa if args.kappa is not None else float(base.get("kappa", 1.0))
    c = args.c if args.c is not None else float(base.get("c", 1.0))
    variant = args.variant or base.get("variant", "hard-min")
    return TwoWellDensity(d, kappa, c, variant)


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path and path != "-" else None


def _dump_json(obj, path):
    text = json.dumps(obj, sort_keys=True, indent=1, default=_default) + "\n"
    if path and path != "-":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


# subcommands -----------------------------------------------------------------

def cmd_profile(args):
    from .profile import ReducedDensity, analytic_K, kdp_equals_2k_report, solve_single_profile
    rd = ReducedDensity(_density(args, d=2))
    aK = analytic_K(rd)
    fh = _open_out(args.out)
    out = fh or sys.stdout
    writer = csv.writer(out, lineterminator="\n")
    try:
        if args.double:
            rep = kdp_equals_2k_report(rd, args.eps, args.w_rule, args.n, args.clamp, args.h, args.well)
            writer.writerow(["eps", "K_eps", "analytic_K", "ratio", "w_eps", "eps0", "E_dp",
                             "E_dp_over_2K"])
            for r in rep.rows:
                writer.writerow([repr(r.eps), repr(r.K_eps), repr(aK), repr(r.K_eps / aK),
                                 repr(r.w_eps), repr(rep.eps0), repr(r.E_dp), repr(r.ratio)])
        else:
            writer.writerow(["eps", "N", "K_eps", "analytic_K", "ratio", "iterations", "seconds"])
            for e in args.eps:
                t0 = time.perf_counter()
                sol = solve_single_profile(rd, e, args.n, args.clamp)
                dt = time.perf_counter() - t0
                writer.writerow([repr(e), sol.N, repr(sol.energy), repr(aK),
                                 repr(sol.energy / aK), sol.iterations, f"{dt:.3f}"])
                if args.profile_out:
                    write_twg(sol.as_field(), args.profile_out)
    finally:
        if fh:
            fh.close()
    return EXIT_OK


def cmd_minimize(args):
    from .optimize import minimize
    y0 = read_twg(args.input)
    W = _density(args, d=y0.d)
    p = EnergyParams(args.eps, y0.d, args.eta)
    try:
        res = minimize(y0, W, p, max_iter=args.max_iter, grad_tol=args.tol, method=args.method)
    except StagnationError as exc:
        if args.out and exc.iterate is not None:
            write_twg(exc.iterate, args.out)
        raise
    write_twg(res.y, args.out, binary=args.binary)
    if args.trace:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "energy"])
            for i, e in enumerate(res.trace):
                w.writerow([i, repr(e)])
    E = energy_eval(res.y, W, p)
    _dump_json({"iterations": res.iterations, "converged": res.converged,
                "grad_norm": res.grad_norm, "bulk": E.bulk, "second_gradient": E.second_gradient,
                "anisotropic": E.anisotropic, "total": E.total}, "-")
    return EXIT_OK


def cmd_energy(args):
    y = read_twg(args.input)
    W = _density(args, d=y.d)
    E = energy_eval(y, W, EnergyParams(args.eps, y.d, args.eta))
    _dump_json({"bulk": E.bulk, "second_gradient": E.second_gradient,
                "anisotropic": E.anisotropic, "total": E.total}, args.out)
    return EXIT_OK


def cmd_decompose(args):
    from .rigidity import decompose_phases, run_length_encode
    y = read_twg(args.input)
    W = _density(args, d=y.d)
    dec = decompose_phases(y, W.kappa, args.window, args.max_iter)
    _dump_json({
        "R": dec.R.tolist(), "residual_l2": dec.residual_l2, "perimeter": dec.perimeter,
        "aniso": dec.aniso, "slice_integral": dec.slice_integral,
        "objective_trace": dec.objective_trace, "monotone": dec.monotone,
        "converged": dec.converged, "warning": dec.warning, "window": dec.window,
        "cell_shape": list(dec.phi.shape), "phi_rle": run_length_encode(dec.phi),
    }, args.out)
    return EXIT_OK


def cmd_partition(args):
    from .partition import (build_partition, coarsen_partition, component_translations,
                            rescaled_displacement)
    from .rigidity import decompose_phases
    y = read_twg(args.input)
    W = _density(args, d=y.d)
    dec = decompose_phases(y, W.kappa, args.window)
    part = component_translations(y, dec.R, build_partition(dec.phi, args.eps, y.spacing, y.origin),
                                  W.kappa)
    coarse = coarsen_partition(part, args.eps, args.threshold)
    out = coarse.to_dict()
    out["R"] = dec.R.tolist()
    out["threshold"] = args.threshold
    out["n_components_before_coarsening"] = len(part.components)
    _dump_json(out, args.out)
    if args.u_out:
        u = rescaled_displacement(y, dec.R, coarse, args.eps, W.kappa)
        write_twg(u.u, args.u_out)
    return EXIT_OK


def cmd_gamma(args):
    from .gamma import check_admissible, limiting_energy, read_triple
    t = read_triple(args.triple)
    base = _density(args, d=t.d)
    W = TwoWellDensity(t.d, t.kappa if args.kappa is None else base.kappa, base.c, base.variant)
    rep = check_admissible(t)
    out = {"ok": rep.ok, "K": args.K,
           "violations": [{"interface": v.interface, "rule": v.rule, "message": v.message}
                          for v in rep.violations]}
    if rep.ok:
        E = limiting_energy(t, args.K, W)
        out.update(elastic=E.elastic, single_surface=E.single_surface,
                   double_surface=E.double_surface, total=E.total)
    _dump_json(out, args.out)
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_convergence(args):
    from .harness import config_from_sections, run_convergence, write_report
    from .textconfig import read_sections
    sections = read_sections(args.config) if args.config else []
    overrides = dict(scenario=args.scenario, eps=tuple(args.eps) if args.eps else None,
                     l=args.l, w_rule=args.w_rule, threshold=args.threshold,
                     kappa=args.kappa, c=args.c, variant=args.variant, workers=args.workers,
                     csv_path=args.csv, json_path=args.json)
    cfg = config_from_sections(sections, **overrides)
    report = run_convergence(cfg)
    os.makedirs(args.workdir, exist_ok=True)
    written = write_report(report, cfg.csv_path, cfg.json_path, args.workdir)
    if not written:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["eps", "E_eps", "E_limit", "gap", "jump_height", "n_components", "residual"])
        for r in report.rows:
            w.writerow([repr(r["eps"]), repr(r["E_eps"]), repr(r["E_limit"]), repr(r["gap"]),
                        repr(r["jump_height"]), r["n_components"], repr(r["residual"])])
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest
    failures = run_selftest(verbose=not args.quiet)
    return EXIT_OK if not failures else 1


# parser ------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="twowell", description="Two-well sharp-interface laboratory.")
    ap.add_argument("--config", help="structured-text config ([density] [sweep] [scenario] [output])")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="optimal single or double transition profile")
    _add_density(p)
    p.add_argument("--eps", type=_eps_list, required=True, help="one value or a decreasing list")
    p.add_argument("--n", type=int, default=4096, help="cells on the unit interval")
    p.add_argument("--clamp", type=float, default=0.05, help="clamped fraction at each end")
    p.add_argument("--double", action="store_true", help="tabulate the double-profile ratio")
    p.add_argument("--w-rule", default="eps", help="layer width rule, e.g. eps, 2eps, C*eps^beta")
    p.add_argument("--h", type=float, default=2.0, help="half-length of the double-profile window")
    p.add_argument("--well", choices=("A", "B"), default="A")
    p.add_argument("--out", default="-", help="CSV output (default stdout)")
    p.add_argument("--profile-out", help="write the last profile as TWG")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("minimize", help="minimize the energy with frozen boundary ring")
    _add_density(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--method", choices=("lbfgs", "gd"), default="lbfgs")
    p.add_argument("--out", required=True)
    p.add_argument("--binary", action="store_true")
    p.add_argument("--trace", help="CSV of the energy trace")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("energy", help="evaluate the energy of a field")
    _add_density(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("decompose", help="rotation and phase field of a deformation")
    _add_density(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--window", choices=("interior", "full"), default="interior")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("partition", help="slab partition, translations and coarsening")
    _add_density(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--threshold", type=float, default=10.0)
    p.add_argument("--window", choices=("interior", "full"), default="full")
    p.add_argument("--out", default="-")
    p.add_argument("--u-out", help="write the rescaled displacement as TWG")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("gamma", help="admissibility and limit energy of a triple spec")
    _add_density(p)
    p.add_argument("--triple", required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("convergence", help="eps sweep through the full pipeline")
    _add_density(p)
    p.add_argument("--scenario", choices=("example-ex", "single-interface", "double-interface",
                                          "custom-field"), default=None)
    p.add_argument("--l", type=_l_value, default=None)
    p.add_argument("--eps", type=_eps_list, default=None)
    p.add_argument("--w-rule", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--json", default=None)
    p.add_argument("--workdir", default=".")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("selftest", help="run the built-in example checks")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config and args.command != "convergence":
            from .textconfig import merged, read_sections
            args._density_defaults = merged(read_sections(args.config)).get("density", {})
        return args.func(args)
    except StagnationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGNATION
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGNATION if isinstance(exc.cause, StagnationError) else EXIT_INVALID
    except (TwoWellError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
