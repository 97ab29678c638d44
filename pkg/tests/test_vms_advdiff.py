import numpy as np
import pytest

from fsgreens.basis1d import Field, Mesh1D, SpaceKind, basis_family, field_eval
from fsgreens.cases import advdiff_const_case, boundary_layer_breakpoints, sin2pix_case
from fsgreens.finescale import build_fine_scale_operator, reconstruct_fine_scales
from fsgreens.kernels import GreensKernel1D
from fsgreens.projection import (
    ProjectionFlavor,
    build_dual_functionals,
    h10_project_from_source,
    project,
)
from fsgreens.vms_advdiff import (
    AdvDiffProblem,
    coarse_update,
    fine_grid,
    fine_scale_interpolant,
    fine_update,
    galerkin_solve,
    iterate,
    make_workspace,
    reconstruct_with_exact_gradient,
)

KERNEL = GreensKernel1D.poisson()


def _h10_setup(num_elements, degree):
    family = basis_family(Mesh1D.uniform(0.0, 1.0, num_elements, degree))
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    op = build_fine_scale_operator(KERNEL, fns)
    return family, fns, op


def test_problem_validation():
    with pytest.raises(ValueError):
        AdvDiffProblem(1.0, -0.1, lambda x: np.ones_like(x))
    problem = AdvDiffProblem(1.0, 0.01, lambda x: np.ones_like(x))
    assert problem.peclet == pytest.approx(50.0)


def test_galerkin_diffusion_limit_polynomial_exact():
    # c = 0, f = 2: the solution x(1-x)/nu lies in the p >= 2 space
    nu = 0.25
    problem = AdvDiffProblem(0.0, nu, lambda x: np.full_like(x, 2.0))
    family = basis_family(Mesh1D.uniform(0.0, 1.0, 3, 2))
    fld = galerkin_solve(problem, family)
    x = np.linspace(0.0, 1.0, 41)
    assert np.max(np.abs(field_eval(fld, x) - x * (1.0 - x) / nu)) < 1e-12


def test_galerkin_zero_source():
    problem = AdvDiffProblem(1.0, 0.1, lambda x: np.zeros_like(x))
    family = basis_family(Mesh1D.uniform(0.0, 1.0, 3, 2))
    fld = galerkin_solve(problem, family)
    assert np.max(np.abs(fld.coeffs)) < 1e-14


def test_galerkin_oscillates_at_high_peclet():
    case = advdiff_const_case(1.0, 0.01)
    problem = AdvDiffProblem(1.0, 0.01, case.source)
    family = basis_family(Mesh1D.uniform(0.0, 1.0, 3, 2))
    fld = galerkin_solve(problem, family)
    diffs = np.diff(fld.coeffs)
    signs = np.sign(diffs[np.abs(diffs) > 1e-12])
    assert np.any(signs[:-1] * signs[1:] < 0)


@pytest.mark.parametrize("p,n", [(2, 3), (4, 3)])
@pytest.mark.parametrize("flavor", [ProjectionFlavor.H10, ProjectionFlavor.L2])
def test_exact_gradient_reconstruction(p, n, flavor):
    c, nu = 1.0, 0.01
    case = advdiff_const_case(c, nu)
    problem = AdvDiffProblem(c, nu, case.source)
    family = basis_family(Mesh1D.uniform(0.0, 1.0, n, p))
    fns = build_dual_functionals(family, flavor)
    op = build_fine_scale_operator(KERNEL, fns)
    layer = boundary_layer_breakpoints(c, nu)
    if flavor is ProjectionFlavor.H10:
        u_bar = project(fns, case.solution, case.gradient, breakpoints=layer)
    else:
        u_bar = project(fns, case.solution, breakpoints=layer)
    grid = np.linspace(0.0, 1.0, 401)
    u_prime = reconstruct_with_exact_gradient(op, problem, u_bar, case.gradient,
                                              grid, breakpoints=layer)
    total = field_eval(u_bar, grid) + u_prime
    assert np.max(np.abs(total - case.solution(grid))) < 5e-4


def test_coarse_update_diffusive_limit_is_source_projection():
    nu = 0.3
    case = sin2pix_case()
    problem = AdvDiffProblem(0.0, nu, case.source)
    family, fns, _ = _h10_setup(3, 2)
    grid = np.linspace(0.0, 1.0, 101)
    zero_field = Field(family, SpaceKind.NODAL, np.zeros(family.mesh.num_nodal_dofs))
    got = coarse_update(fns, problem, zero_field, grid, np.zeros(grid.size))
    want = h10_project_from_source(fns, lambda x: case.source(x) / nu)
    assert np.max(np.abs(got - want.coeffs)) < 1e-12


def test_updates_fixed_point_consistency():
    # substituting the analytic solution split leaves both maps unchanged
    c, nu = 1.0, 0.01
    case = advdiff_const_case(c, nu)
    problem = AdvDiffProblem(c, nu, case.source)
    family, fns, op = _h10_setup(3, 2)
    layer = boundary_layer_breakpoints(c, nu)
    u_bar = project(fns, case.solution, case.gradient, breakpoints=layer)
    grid = fine_grid(family.mesh, 2001)
    u_prime = case.solution(grid) - field_eval(u_bar, grid)
    new_coarse = coarse_update(fns, problem, u_bar, grid, u_prime)
    assert np.max(np.abs(new_coarse - u_bar.coeffs)) < 5e-6
    new_fine = fine_update(op, problem, u_bar, grid, u_prime)
    assert np.max(np.abs(new_fine - u_prime)) < 5e-4


def test_fine_update_specializes_to_diffusion_fine_scales():
    nu = 2.0
    case = sin2pix_case()
    problem = AdvDiffProblem(0.0, nu, case.source)
    family, fns, op = _h10_setup(5, 2)
    grid = np.linspace(0.0, 1.0, 1001)
    zero_field = Field(family, SpaceKind.NODAL, np.zeros(family.mesh.num_nodal_dofs))
    got = fine_update(op, problem, zero_field, grid, np.zeros(grid.size))
    from fsgreens.finescale import SourceTerm

    want = reconstruct_fine_scales(
        op, SourceTerm.from_function(lambda s: case.source(s) / nu), grid)
    assert np.max(np.abs(got - want)) < 1e-12


def test_workspace_sweeps_match_generic_updates():
    from fsgreens.vms_advdiff import _coarse_sweep, _fine_sweep

    c, nu = 1.0, 0.05
    case = advdiff_const_case(c, nu)
    problem = AdvDiffProblem(c, nu, case.source)
    family, fns, op = _h10_setup(3, 2)
    ws = make_workspace(problem, fns, op, 1201)
    rng = np.random.default_rng(2)
    coeffs = np.zeros(family.mesh.num_nodal_dofs)
    coeffs[1:-1] = 0.1 * rng.normal(size=coeffs.size - 2)
    u_bar = Field(family, SpaceKind.NODAL, coeffs)
    fine = 0.03 * np.sin(2.5 * np.pi * ws.grid) * ws.grid * (1 - ws.grid)
    spline = fine_scale_interpolant(family, ws.grid, fine)
    fast_coarse = _coarse_sweep(ws, coeffs[1:-1], spline)
    slow_coarse = coarse_update(fns, problem, u_bar, ws.grid, fine)
    assert np.max(np.abs(fast_coarse - slow_coarse[1:-1])) < 1e-11
    fast_fine = _fine_sweep(ws, coeffs[1:-1], spline)
    slow_fine = fine_update(op, problem, u_bar, ws.grid, fine)
    assert np.max(np.abs(fast_fine - slow_fine)) < 1e-6


def test_iterate_diffusive_limit_matches_projection():
    nu = 1.0
    case = sin2pix_case()
    problem = AdvDiffProblem(0.0, nu, case.source)
    family, fns, op = _h10_setup(4, 2)
    state = iterate(problem, fns, op, max_iter=200)
    assert state.converged
    want = h10_project_from_source(fns, case.source)
    assert np.max(np.abs(state.u_bar.coeffs - want.coeffs)) < 1e-7


def test_iterate_converges_with_default_rule_at_moderate_peclet():
    # the 1/(2 alpha) relaxation rule is inside its stability region here
    c, nu = 1.0, 0.025
    case = advdiff_const_case(c, nu)
    problem = AdvDiffProblem(c, nu, case.source)
    family, fns, op = _h10_setup(3, 2)
    state = iterate(problem, fns, op, max_iter=6000)
    assert state.converged
    layer = boundary_layer_breakpoints(c, nu)
    direct = project(fns, case.solution, case.gradient, breakpoints=layer)
    grid = np.linspace(0.0, 1.0, 401)
    assert np.max(np.abs(field_eval(state.u_bar, grid) - field_eval(direct, grid))) < 5e-4
    spline = fine_scale_interpolant(family, state.u_prime_grid, state.u_prime)
    exact_fine = case.solution(grid) - field_eval(direct, grid)
    assert np.max(np.abs(spline(grid) - exact_fine)) < 5e-4
    # monotone tail within ten percent slack
    tail = np.asarray(state.residual_history[-10:])
    assert np.all(tail[1:] <= 1.1 * tail[:-1])
    # one more sweep moves the coarse scales by at most ten tolerances
    again = iterate(problem, fns, op, max_iter=state.iteration + 1)
    delta = again.residual_history[-1]
    assert delta < 10.0 * 1e-8


def test_iterate_high_peclet_converges_inside_stability_region():
    # at alpha = 50 the 1/(2 alpha) rule sits outside the stability bound
    # w < 2/(1 + (alpha/pi)^2) ~ 0.0079; halving it restores convergence
    # and the converged scales match the direct projection
    c, nu = 1.0, 0.01
    case = advdiff_const_case(c, nu)
    problem = AdvDiffProblem(c, nu, case.source)
    family, fns, op = _h10_setup(3, 2)
    state = iterate(problem, fns, op, relaxation=0.005, max_iter=12000)
    assert state.converged
    layer = boundary_layer_breakpoints(c, nu)
    direct = project(fns, case.solution, case.gradient, breakpoints=layer)
    grid = np.linspace(0.0, 1.0, 401)
    assert np.max(np.abs(field_eval(state.u_bar, grid) - field_eval(direct, grid))) < 5e-4
    interp = fine_scale_interpolant(family, state.u_prime_grid, state.u_prime)
    exact_fine = case.solution(grid) - field_eval(direct, grid)
    assert np.max(np.abs(interp(grid) - exact_fine)) < 5e-4


def test_iterate_nonconvergence_is_reported_not_raised():
    c, nu = 1.0, 0.01
    case = advdiff_const_case(c, nu)
    problem = AdvDiffProblem(c, nu, case.source)
    family, fns, op = _h10_setup(3, 2)
    state = iterate(problem, fns, op, max_iter=50)
    assert not state.converged
    assert state.iteration == 50
    assert len(state.residual_history) == 50


def test_iterate_rejects_bad_parameters():
    problem = AdvDiffProblem(1.0, 0.01, lambda x: np.ones_like(x))
    family, fns, op = _h10_setup(2, 2)
    with pytest.raises(ValueError):
        iterate(problem, fns, op, relaxation=1.5)
    with pytest.raises(ValueError):
        iterate(problem, fns, op, tolerance=-1.0)
