"""Experiment driver: every headline result as a reproducible data file.

Each subcommand runs one pipeline deterministically and writes CSV
(default) or JSON.  Files are written atomically (temp file plus rename)
and identical flags produce byte-identical output.  The FSG_QUAD_POINTS
environment variable overrides the default quadrature density.

Exit codes: 0 success, 1 numerical defect (failed factorization or
required convergence not reached), 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .basis1d import Mesh1D, SpaceKind, basis_family, field_eval, tabulate_edge, tabulate_nodal
from .cases import advdiff_const_case, boundary_layer_breakpoints, sin2pix_case, sin2pixy_case
from .dualspace import build_duals, tabulate_duals
from .finescale import (
    build_fine_scale_operator,
    fine_scale_eval,
    reconstruct_fine_scales,
    residual_from_field,
)
from .kernels import GreensKernel1D, advdiff_green, poisson2d_green, poisson_green
from .poisson2d import (
    Mesh2D,
    build_dual_functionals_2d,
    build_series_operator_2d,
    project_2d,
    reconstruct_fine_scales_2d,
    residual_2d,
)
from .projection import (
    DualFunctionals,
    ProjectionFlavor,
    build_dual_functionals,
    h10_project_from_source,
    project,
)
from .quadrature import DEFAULT_QUAD_POINTS, gll_rule
from .vms_advdiff import AdvDiffProblem, galerkin_solve, iterate, reconstruct_with_exact_gradient


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fsgreens-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path: str, columns, rows, meta: dict, fmt: str):
    """Serialize a column-labelled table as CSV or JSON, atomically."""
    if fmt == "csv":
        lines = [",".join(columns)]
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        _write_atomic(path, "\n".join(lines) + "\n")
    else:
        payload = {
            "meta": dict(meta, version=__version__),
            "columns": list(columns),
            "rows": [[float(_fmt(v)) for v in row] for row in rows],
        }
        _write_atomic(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _flavor(name: str) -> ProjectionFlavor:
    return ProjectionFlavor.H10 if name == "h10" else ProjectionFlavor.L2


def _build(args) -> tuple[DualFunctionals, int]:
    quad = args.quad_points
    mesh = Mesh1D.uniform(0.0, 1.0, args.elements, args.p)
    family = basis_family(mesh)
    return build_dual_functionals(family, _flavor(args.projection), quad), quad


def _meta(args, **extra) -> dict:
    meta = {k: v for k, v in vars(args).items() if k not in ("func", "format", "out")}
    meta.update(extra)
    return meta


def cmd_gll(args):
    rule = gll_rule(args.p)
    rows = [[i, rule.nodes[i], rule.weights[i]] for i in range(rule.npoints)]
    write_table(args.out, ["i", "node", "weight"], rows, _meta(args), args.format)


def cmd_basis(args):
    mesh = Mesh1D.uniform(args.a, args.b, args.elements, args.p)
    family = basis_family(mesh)
    x = np.linspace(args.a, args.b, args.grid)
    if args.kind == "nodal":
        tab = tabulate_nodal(family, x)
    else:
        tab = tabulate_edge(family, x)
    columns = ["x"] + [f"{args.kind}_{i}" for i in range(tab.shape[1])]
    rows = np.column_stack([x, tab])
    write_table(args.out, columns, rows, _meta(args), args.format)


def cmd_dual(args):
    mesh = Mesh1D.uniform(args.a, args.b, args.elements, args.p)
    family = basis_family(mesh)
    kind = SpaceKind.DUAL_NODAL if args.kind == "nodal" else SpaceKind.DUAL_EDGE
    duals = build_duals(family, kind, args.quad_points)
    x = np.linspace(args.a, args.b, args.grid)
    tab = tabulate_duals(duals, x)
    columns = ["x"] + [f"dual_{args.kind}_{i}" for i in range(tab.shape[1])]
    rows = np.column_stack([x, tab])
    write_table(args.out, columns, rows, _meta(args), args.format)


def cmd_project(args):
    fns, quad = _build(args)
    case = sin2pix_case()
    if fns.flavor is ProjectionFlavor.H10:
        fld = project(fns, case.solution, case.gradient, quad)
    else:
        fld = project(fns, case.solution, quad_points=quad)
    x = np.linspace(0.0, 1.0, args.grid)
    projected = field_eval(fld, x)
    exact = case.solution(x)
    rows = np.column_stack([x, exact, projected, exact - projected])
    write_table(args.out, ["x", "exact", "projected", "error"], rows, _meta(args), args.format)


def cmd_greens(args):
    if args.kernel == "poisson2d":
        x = np.linspace(0.0, 1.0, args.grid)
        g = poisson2d_green(x[:, None], x[None, :], args.s1, args.s2, args.terms)
        rows = [[xv, yv, g[i, j]] for i, xv in enumerate(x) for j, yv in enumerate(x)]
        write_table(args.out, ["x", "y", "g"], rows, _meta(args), args.format)
        return
    x = np.linspace(0.0, 1.0, args.grid)
    if args.kernel == "poisson":
        g = poisson_green(x[:, None], x[None, :])
    else:
        g = advdiff_green(x[:, None], x[None, :], args.c, args.nu)
    rows = [[xv, sv, g[i, j]] for i, xv in enumerate(x) for j, sv in enumerate(x)]
    write_table(args.out, ["x", "s", "g"], rows, _meta(args), args.format)


def cmd_finescale(args):
    fns, quad = _build(args)
    op = build_fine_scale_operator(GreensKernel1D.poisson(), fns, quad)
    x = np.linspace(0.0, 1.0, args.grid)
    full = op.kernel(x[:, None], x[None, :])
    fine = fine_scale_eval(op, x, x)
    rows = [[x[i], x[j], full[i, j], fine[i, j]]
            for i in range(x.size) for j in range(x.size)]
    write_table(args.out, ["x", "s", "g", "g_prime"], rows, _meta(args), args.format)


def cmd_reconstruct(args):
    fns, quad = _build(args)
    grid = np.linspace(0.0, 1.0, args.grid)
    kernel = GreensKernel1D.poisson()
    op = build_fine_scale_operator(kernel, fns, quad)
    if args.case == "sin2pix":
        case = sin2pix_case()
        if fns.flavor is ProjectionFlavor.H10:
            u_bar = h10_project_from_source(fns, case.source, quad)
        else:
            u_bar = project(fns, case.solution, quad_points=quad)
        resid = residual_from_field(u_bar, case.source)
        u_prime = reconstruct_fine_scales(op, resid, grid)
    else:
        case = advdiff_const_case(args.c, args.nu)
        problem = AdvDiffProblem(args.c, args.nu, case.source)
        layer = boundary_layer_breakpoints(args.c, args.nu)
        if fns.flavor is ProjectionFlavor.H10:
            u_bar = project(fns, case.solution, case.gradient, quad, breakpoints=layer)
        else:
            u_bar = project(fns, case.solution, quad_points=quad, breakpoints=layer)
        u_prime = reconstruct_with_exact_gradient(op, problem, u_bar, case.gradient,
                                                  grid, breakpoints=layer)
    u_bar_vals = field_eval(u_bar, grid)
    exact = case.solution(grid)
    rows = np.column_stack([grid, exact, u_bar_vals, u_prime, u_bar_vals + u_prime])
    write_table(args.out, ["x", "u_exact", "u_bar", "u_prime", "u_total"],
                rows, _meta(args), args.format)


def cmd_vms_iter(args):
    case = advdiff_const_case(args.c, args.nu)
    problem = AdvDiffProblem(args.c, args.nu, case.source)
    mesh = Mesh1D.uniform(0.0, 1.0, args.elements, args.p)
    family = basis_family(mesh)
    fns = build_dual_functionals(family, ProjectionFlavor.H10, args.quad_points)
    op = build_fine_scale_operator(GreensKernel1D.poisson(), fns, args.quad_points)
    state = iterate(problem, fns, op, relaxation=args.w, tolerance=args.eps,
                    max_iter=args.max_iter, fine_grid_points=args.fine_grid,
                    quad_points=args.quad_points)
    galerkin = galerkin_solve(problem, family, args.quad_points,
                              breakpoints=boundary_layer_breakpoints(args.c, args.nu))
    grid = state.u_prime_grid
    rows = np.column_stack([
        grid,
        case.solution(grid),
        field_eval(state.u_bar, grid),
        state.u_prime,
        field_eval(galerkin, grid),
    ])
    write_table(args.out, ["x", "u_exact", "u_bar", "u_prime", "galerkin"],
                rows, _meta(args, converged=state.converged, iterations=state.iteration),
                args.format)
    history_rows = [[i + 1, inc] for i, inc in enumerate(state.residual_history)]
    write_table(args.history_out, ["iteration", "increment"], history_rows,
                _meta(args, converged=state.converged), args.format)
    if not state.converged:
        print(f"fsgreens: iteration did not reach eps={args.eps} "
              f"within {args.max_iter} sweeps (last increment "
              f"{state.residual_history[-1]:.3e})", file=sys.stderr)
        return 1
    return 0


def cmd_poisson2d(args):
    case = sin2pixy_case()
    mesh = Mesh2D(Mesh1D.uniform(0.0, 1.0, args.elements, args.p))
    duals = build_dual_functionals_2d(mesh)
    u_bar = project_2d(duals, source=case.source, quad_points=args.quad_points)
    op = build_series_operator_2d(duals, args.terms, args.quad_points)
    grid = np.linspace(0.0, 1.0, args.grid)
    u_prime = reconstruct_fine_scales_2d(op, residual_2d(case.source, u_bar), grid, grid)
    u_bar_grid = u_bar.eval_grid(grid, grid)
    exact = case.solution(grid[:, None], grid[None, :])
    rows = [[grid[i], grid[j], exact[i, j], u_bar_grid[i, j], u_prime[i, j],
             u_bar_grid[i, j] + u_prime[i, j]]
            for i in range(grid.size) for j in range(grid.size)]
    write_table(args.out, ["x", "y", "phi_exact", "phi_bar", "u_prime", "phi_total"],
                rows, _meta(args), args.format)


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_common(sub, grid_default=401):
    sub.add_argument("--out", default=None, help="output path (default: derived)")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--grid", type=_positive_int, default=grid_default,
                     help="output sample count")
    sub.add_argument("--quad-points", type=_positive_int, default=None,
                     help="quadrature points per subinterval "
                          "(default 20, or FSG_QUAD_POINTS)")


def _add_mesh(sub, p_default=2, n_default=2):
    sub.add_argument("--p", type=_positive_int, default=p_default, help="polynomial degree")
    sub.add_argument("--elements", type=_positive_int, default=n_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsgreens",
        description="dual-basis projections and fine-scale Green's function experiments",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("gll", help="GLL nodes and weights")
    sub.add_argument("--p", type=_positive_int, required=True)
    _add_common(sub)
    sub.set_defaults(func=cmd_gll)

    sub = subs.add_parser("basis", help="sample the primal nodal or edge basis")
    _add_mesh(sub, p_default=3, n_default=1)
    sub.add_argument("--kind", choices=("nodal", "edge"), default="nodal")
    sub.add_argument("--a", type=float, default=-1.0)
    sub.add_argument("--b", type=float, default=1.0)
    _add_common(sub)
    sub.set_defaults(func=cmd_basis)

    sub = subs.add_parser("dual", help="sample a dual basis")
    _add_mesh(sub, p_default=3, n_default=2)
    sub.add_argument("--kind", choices=("nodal", "edge"), default="nodal",
                     help="dual-nodal (pairs edges) or dual-edge (pairs nodes)")
    sub.add_argument("--a", type=float, default=0.0)
    sub.add_argument("--b", type=float, default=1.0)
    _add_common(sub)
    sub.set_defaults(func=cmd_dual)

    sub = subs.add_parser("project", help="project the sine benchmark")
    _add_mesh(sub, p_default=2, n_default=5)
    sub.add_argument("--projection", choices=("h10", "l2"), default="h10")
    _add_common(sub)
    sub.set_defaults(func=cmd_project)

    sub = subs.add_parser("greens", help="sample an analytic kernel")
    sub.add_argument("--kernel", choices=("poisson", "advdiff", "poisson2d"),
                     default="poisson")
    sub.add_argument("--c", type=float, default=1.0)
    sub.add_argument("--nu", type=float, default=0.01)
    sub.add_argument("--s1", type=float, default=0.5)
    sub.add_argument("--s2", type=float, default=0.5)
    sub.add_argument("--terms", type=_positive_int, default=100)
    _add_common(sub, grid_default=101)
    sub.set_defaults(func=cmd_greens)

    sub = subs.add_parser("finescale", help="fine-scale kernel surface")
    _add_mesh(sub)
    sub.add_argument("--projection", choices=("h10", "l2"), default="h10")
    _add_common(sub, grid_default=41)
    sub.set_defaults(func=cmd_finescale)

    sub = subs.add_parser("reconstruct", help="coarse field plus reconstructed fine scales")
    _add_mesh(sub, p_default=2, n_default=5)
    sub.add_argument("--projection", choices=("h10", "l2"), default="h10")
    sub.add_argument("--case", choices=("sin2pix", "advdiff-const"), default="sin2pix")
    sub.add_argument("--c", type=float, default=1.0)
    sub.add_argument("--nu", type=float, default=0.01)
    _add_common(sub)
    sub.set_defaults(func=cmd_reconstruct)

    sub = subs.add_parser("vms-iter", help="iterative coupled coarse/fine solve")
    _add_mesh(sub, p_default=2, n_default=3)
    sub.add_argument("--c", type=float, default=1.0)
    sub.add_argument("--nu", type=float, default=0.01)
    sub.add_argument("--w", type=float, default=None,
                     help="relaxation factor (default: 1/(2 alpha))")
    sub.add_argument("--eps", type=float, default=1e-8)
    sub.add_argument("--max-iter", type=_positive_int, default=100_000)
    sub.add_argument("--fine-grid", type=_positive_int, default=2001)
    sub.add_argument("--history-out", default=None)
    _add_common(sub)
    sub.set_defaults(func=cmd_vms_iter)

    sub = subs.add_parser("poisson2d", help="2D projection and fine-scale reconstruction")
    _add_mesh(sub, p_default=1, n_default=2)
    sub.add_argument("--terms", type=_positive_int, default=100)
    _add_common(sub, grid_default=41)
    sub.set_defaults(func=cmd_poisson2d)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.quad_points is None:
        env = os.environ.get("FSG_QUAD_POINTS")
        args.quad_points = int(env) if env else DEFAULT_QUAD_POINTS
    if args.out is None:
        args.out = f"fsgreens-{args.command}.{args.format}"
    if args.command == "vms-iter" and args.history_out is None:
        stem, ext = os.path.splitext(args.out)
        args.history_out = f"{stem}-history{ext}"
    try:
        status = args.func(args)
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"fsgreens: {exc}", file=sys.stderr)
        return 1
    return int(status or 0)


if __name__ == "__main__":
    sys.exit(main())
