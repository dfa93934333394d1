"""Command-line front end.

Exit codes: 0 all verdicts holds_strict / pass, 2 inconclusive or failed
preconditions, 3 a violated verdict, 1 execution error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .boundary_ops import SpecError, Zero, parse_spec, plane_wave_form
from .eigen import SolveOptions, solve, write_spectrum_csv
from .geometry import boundary_traversal, build_domain, mesh_at_level, read_m2d, refine, write_m2d
from .assembly import assemble_mass, assemble_stiffness, reduce_dirichlet
from . import harness

log = logging.getLogger("robinlab")

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_VIOLATED = 0, 1, 2, 3


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _vec2(text):
    v = _floats(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError("wave vector needs two components x,y")
    return v


def _theta(text):
    try:
        spec = parse_spec(text)
    except SpecError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return spec


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robinlab", description="Robin/Neumann/Dirichlet eigenvalue laboratory on polygons.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--dense-threshold", type=int, default=2000)
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("mesh", help="write a refined mesh")
    m.add_argument("domain")
    m.add_argument("--level", type=int, default=0)
    m.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="smallest eigenvalues for one boundary condition")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--domain")
    g.add_argument("--mesh", help="mesh file in .m2d format (refined --level times)")
    s.add_argument("--bc", required=True, help="dirichlet | neumann | robin:<spec>")
    s.add_argument("--level", type=int, default=4)
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--out")

    v = sub.add_parser("verify", help="verification campaigns")
    vs = v.add_subparsers(dest="campaign", required=True, parser_class=_Parser)
    common = dict(domain=dict(default="unit_square"), levels=dict(type=_ints, default=[4, 5]))

    vi = vs.add_parser("interlace")
    vi.add_argument("--domain", **common["domain"])
    vi.add_argument("--theta", type=_theta, default=Zero())
    vi.add_argument("--jmax", type=int, default=10)
    vi.add_argument("--levels", **common["levels"])
    vi.add_argument("--n-eta", type=int, default=32)
    vi.add_argument("--delta", type=float, default=0.1)
    vi.add_argument("--out")

    vc = vs.add_parser("counting")
    vc.add_argument("--domain", **common["domain"])
    vc.add_argument("--theta", type=_theta, default=Zero())
    vc.add_argument("--j", type=int, required=True)
    vc.add_argument("--levels", **common["levels"])
    vc.add_argument("--dirichlet-values", type=_floats, help="exact Dirichlet eigenvalues replacing extrapolation")
    vc.add_argument("--out")

    vf = vs.add_parser("filonov")
    vf.add_argument("--domain", **common["domain"])
    vf.add_argument("--theta", type=_theta, default=Zero())
    vf.add_argument("--j", type=int, required=True)
    vf.add_argument("--levels", **common["levels"])
    vf.add_argument("--eta", type=_vec2)
    vf.add_argument("--out")

    vsf = vs.add_parser("safarov")
    vsf.add_argument("--domain", **common["domain"])
    vsf.add_argument("--theta", type=_theta, default=Zero())
    vsf.add_argument("--j", type=int, required=True)
    vsf.add_argument("--levels", **common["levels"])
    vsf.add_argument("--eta", type=_vec2, action="append", default=[])
    vsf.add_argument("--random", type=int, default=0, help="add N random directions")
    vsf.add_argument("--out")

    t = sub.add_parser("trace-beta", help="discrete trace constants beta(eps)")
    t.add_argument("--domain", default="unit_square")
    t.add_argument("--level", type=int, default=4)
    t.add_argument("--eps", type=_floats, required=True)

    k = sub.add_parser("kappa", help="discrete coercivity shift")
    k.add_argument("--domain", default="unit_square")
    k.add_argument("--theta", type=_theta, default=Zero())
    k.add_argument("--level", type=int, default=4)
    k.add_argument("--c0", type=float, default=0.5)

    w = sub.add_parser("plane-wave", help="evaluate <e, Theta e> on plane waves")
    w.add_argument("--domain", default="unit_square")
    w.add_argument("--theta", type=_theta, required=True)
    w.add_argument("--level", type=int, default=2)
    w.add_argument("--eta", type=_vec2, action="append", default=[])
    w.add_argument("--random", type=int, default=0)
    w.add_argument("--radius", type=float, default=10.0, help="scale of random wave vectors")

    pd = sub.add_parser("plot-data", help="series CSV and figure from an interlacing report")
    pd.add_argument("--from", dest="source", required=True)
    pd.add_argument("--out", required=True)
    pd.add_argument("--no-figure", action="store_true")
    return p


def _opts(args):
    return SolveOptions(dense_threshold=args.dense_threshold, seed=0)


def _config(args) -> dict:
    cfg = {}
    for key, val in sorted(vars(args).items()):
        if hasattr(val, "to_text"):
            val = val.to_text()
        elif isinstance(val, list) and val and isinstance(val[0], list):
            val = [list(map(float, v)) for v in val]
        cfg[key] = val
    return cfg


def _emit(text: str, out):
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CLIError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _dump(d) -> str:
    return harness._dumps(d)


def cmd_mesh(args):
    mesh = mesh_at_level(build_domain(args.domain), args.level)
    try:
        write_m2d(mesh, args.out)
    except OSError as exc:
        raise CLIError(f"cannot write {args.out}: {exc}") from None
    print(f"nodes={mesh.n_nodes} triangles={mesh.n_triangles} boundary_edges={len(mesh.boundary_edges)} h={mesh.h!r}")
    return EXIT_OK


def cmd_solve(args):
    if args.mesh:
        mesh = read_m2d(args.mesh)
        for _ in range(args.level):
            mesh = refine(mesh)
    else:
        mesh = mesh_at_level(build_domain(args.domain), args.level)
    k = assemble_stiffness(mesh)
    m = assemble_mass(mesh)
    bc = args.bc.strip()
    if bc == "dirichlet":
        red = reduce_dirichlet(k, m, mesh)
        k, m = red.stiffness, red.mass
    elif bc == "neumann":
        pass
    elif bc.startswith("robin:"):
        try:
            spec = parse_spec(bc[len("robin:"):])
        except SpecError as exc:
            raise CLIError(str(exc)) from None
        k = k + spec.form(mesh, boundary_traversal(mesh))
    else:
        raise CLIError(f"unknown boundary condition {bc!r}")
    s = solve(k, m, min(args.count, k.n_dof), _opts(args))
    buf = io.StringIO()
    for i, val in enumerate(s.eigenvalues, start=1):
        buf.write(f"{i} {val:.17g}\n")
    sys.stdout.write(buf.getvalue())
    if args.out:
        try:
            write_spectrum_csv(s, args.out)
        except OSError as exc:
            raise CLIError(f"cannot write {args.out}: {exc}") from None
    return EXIT_OK


def cmd_interlace(args):
    rep = harness.verify_interlacing(args.domain, args.theta, args.jmax, args.levels, seed=args.seed,
                                     n_eta=args.n_eta, delta=args.delta, opts=_opts(args))
    d = rep.to_dict()
    d["config"] = _config(args)
    _emit(_dump(d), args.out)
    for r in rep.rows:
        print(f"j={r['j']:3d} theta={r['lambda_theta']:.10g}+/-{r['lambda_theta_err']:.2g} "
              f"dirichlet={r['lambda_dirichlet']:.10g}+/-{r['lambda_dirichlet_err']:.2g} {r['verdict']}",
              file=sys.stderr)
    if not rep.conditions["preconditions_passed"]:
        print("preconditions failed: plane-wave condition not satisfied; not certified", file=sys.stderr)
    return rep.exit_code


def cmd_counting(args):
    rep = harness.verify_counting(args.domain, args.theta, args.j, args.levels,
                                  dirichlet_values=args.dirichlet_values, opts=_opts(args))
    d = rep.to_dict()
    d["config"] = _config(args)
    _emit(_dump(d), args.out)
    return rep.exit_code


def cmd_filonov(args):
    reps = [harness.filonov_trial_check(args.domain, args.theta, args.j, lv, args.eta, seed=args.seed,
                                        opts=_opts(args)) for lv in args.levels]
    consts = [r.constant for r in reps]
    d = {"schema_version": harness.SCHEMA_VERSION, "levels": [r.to_dict() for r in reps],
         "constant_decreasing": all(b < a for a, b in zip(consts, consts[1:])), "config": _config(args)}
    _emit(_dump(d), args.out)
    return EXIT_OK if all(r.plane_wave_ok for r in reps) else EXIT_INCONCLUSIVE


def cmd_safarov(args):
    etas = list(args.eta)
    if args.random:
        etas += [list(v) for v in harness.eta_samples([1.0], args.random, args.seed)]
    if not etas:
        raise CLIError("give at least one --eta or --random N")
    with warnings.catch_warnings():
        if not args.eta:
            # random entries are unit directions; rescaling them is expected
            warnings.simplefilter("ignore", RuntimeWarning)
        rep = harness.safarov_weak_check(args.domain, args.theta, args.j, etas, args.levels, opts=_opts(args))
    d = {"schema_version": harness.SCHEMA_VERSION, "safarov": rep.to_dict(), "config": _config(args)}
    _emit(_dump(d), args.out)
    return EXIT_OK if rep.strict_certified else EXIT_INCONCLUSIVE


def cmd_trace_beta(args):
    mesh = mesh_at_level(build_domain(args.domain), args.level)
    for e in args.eps:
        print(f"{e!r},{harness.trace_beta(mesh, e, _opts(args)):.17g}")
    return EXIT_OK


def cmd_kappa(args):
    mesh = mesh_at_level(build_domain(args.domain), args.level)
    print(f"{harness.coercivity_kappa(mesh, args.theta, args.c0, _opts(args)):.17g}")
    return EXIT_OK


def cmd_plane_wave(args):
    mesh = mesh_at_level(build_domain(args.domain), args.level)
    tr = boundary_traversal(mesh)
    etas = [np.asarray(e) for e in args.eta]
    if args.random:
        rng = np.random.default_rng(args.seed)
        etas += list(rng.uniform(-args.radius, args.radius, (args.random, 2)))
    if not etas:
        raise CLIError("give at least one --eta or --random N")
    for e in etas:
        print(f"{float(e[0])!r},{float(e[1])!r},{plane_wave_form(mesh, tr, args.theta, e):.17g}")
    return EXIT_OK


def cmd_plot_data(args):
    try:
        rep = json.loads(Path(args.source).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CLIError(f"cannot read report {args.source}: {exc}") from None
    rows = rep.get("rows")
    if not isinstance(rows, list):
        raise CLIError("report has no rows")
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["j", "lambda_theta", "lambda_theta_err", "lambda_dirichlet", "lambda_dirichlet_err", "margin",
                 "verdict"])
    for r in rows:
        wr.writerow([r["j"], f"{r['lambda_theta']:.17g}", f"{r['lambda_theta_err']:.17g}",
                     f"{r['lambda_dirichlet']:.17g}", f"{r['lambda_dirichlet_err']:.17g}",
                     f"{r['margin']:.17g}", r["verdict"]])
    _emit(buf.getvalue(), args.out)
    if not args.no_figure:
        from .plotting import interlacing_figure

        title = f"{rep.get('problem', {}).get('domain', '')}  theta={rep.get('problem', {}).get('theta', '')}"
        interlacing_figure(rows, str(Path(args.out).with_suffix(".png")), title)
    return EXIT_OK


COMMANDS = {
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "trace-beta": cmd_trace_beta,
    "kappa": cmd_kappa,
    "plane-wave": cmd_plane_wave,
    "plot-data": cmd_plot_data,
}
CAMPAIGNS = {"interlace": cmd_interlace, "counting": cmd_counting, "filonov": cmd_filonov, "safarov": cmd_safarov}


def run(argv=None) -> int:
    """Parse ``argv`` and execute; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        if args.command == "verify":
            return CAMPAIGNS[args.campaign](args)
        return COMMANDS[args.command](args)
    except Exception as exc:  # every failure maps to exit code 1
        log.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
