import numpy as np
import pytest

from fsgreens.basis1d import (
    Field,
    Mesh1D,
    SpaceKind,
    basis_family,
    field_eval,
    tabulate_edge,
    tabulate_nodal,
)
from fsgreens.cases import sin2pix_case
from fsgreens.projection import (
    ProjectionFlavor,
    assemble_stiffness,
    build_dual_functionals,
    h10_project_from_source,
    h10_project_values,
    mesh_quadrature,
    project,
    tabulate_functionals,
)

CASE = sin2pix_case()


@pytest.fixture(params=[(2, 1), (3, 2), (2, 3), (5, 2)],
                ids=lambda t: f"N{t[0]}p{t[1]}")
def family(request):
    n, p = request.param
    return basis_family(Mesh1D.uniform(0.0, 1.0, n, p))


def test_stiffness_hand_value():
    family = basis_family(Mesh1D.uniform(0.0, 1.0, 2, 1))
    stiff = assemble_stiffness(family)
    assert np.allclose(stiff.entries, [[4.0]], atol=1e-13)
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    x = np.array([0.25, 0.5])
    tab = tabulate_functionals(fns, x)
    assert tab[1, 0] == pytest.approx(0.25, abs=1e-14)
    assert tab[0, 0] == pytest.approx(0.125, abs=1e-14)


def test_h10_functionals_biorthogonal(family):
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    x, w = mesh_quadrature(family, 14)
    dtab = tabulate_functionals(fns, x, deriv=1)
    basis_dtab = tabulate_nodal(family, x, deriv=1)[:, 1:-1]
    gram = dtab.T @ (w[:, None] * basis_dtab)
    assert np.max(np.abs(gram - np.eye(fns.size))) < 1e-10


def test_l2_functionals_biorthogonal(family):
    fns = build_dual_functionals(family, ProjectionFlavor.L2)
    x, w = mesh_quadrature(family, 14)
    tab = tabulate_functionals(fns, x)
    gram = tab.T @ (w[:, None] * tabulate_edge(family, x))
    assert np.max(np.abs(gram - np.eye(fns.size))) < 1e-10


def test_h10_functionals_vanish_at_boundary_and_positive(family):
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    ends = tabulate_functionals(fns, np.array([0.0, 1.0]))
    assert np.max(np.abs(ends)) < 1e-14
    interior = tabulate_functionals(fns, np.linspace(0.01, 0.99, 101))
    assert np.min(interior) > 0.0


def test_l2_build_matches_dual_nodal_exactly(family):
    from fsgreens.dualspace import build_duals, tabulate_duals

    fns = build_dual_functionals(family, ProjectionFlavor.L2)
    duals = build_duals(family, SpaceKind.DUAL_NODAL)
    x = np.linspace(0.0, 1.0, 37)
    assert np.array_equal(tabulate_functionals(fns, x), tabulate_duals(duals, x))


@pytest.mark.parametrize("flavor", [ProjectionFlavor.L2, ProjectionFlavor.H10])
def test_projector_idempotent_on_target_space(family, flavor):
    fns = build_dual_functionals(family, flavor)
    rng = np.random.default_rng(17)
    if flavor is ProjectionFlavor.L2:
        coeffs = rng.normal(size=family.mesh.num_edge_dofs)
        fld = Field(family, SpaceKind.EDGE, coeffs)
        out = project(fns, lambda x: field_eval(fld, x))
        assert np.max(np.abs(out.coeffs - coeffs)) < 1e-9
    else:
        coeffs = np.zeros(family.mesh.num_nodal_dofs)
        coeffs[1:-1] = rng.normal(size=family.mesh.num_nodal_dofs - 2)
        fld = Field(family, SpaceKind.NODAL, coeffs)
        out = project(fns, lambda x: field_eval(fld, x),
                      lambda x: field_eval(fld, x, deriv=1))
        assert np.max(np.abs(out.coeffs - coeffs)) < 1e-9


def test_l2_residual_orthogonal_to_edge_space():
    family = basis_family(Mesh1D.uniform(0.0, 1.0, 5, 2))
    fns = build_dual_functionals(family, ProjectionFlavor.L2)
    fld = project(fns, CASE.solution)
    x, w = mesh_quadrature(family, 20)
    resid = CASE.solution(x) - field_eval(fld, x)
    orth = tabulate_edge(family, x).T @ (w * resid)
    assert np.max(np.abs(orth)) < 1e-9


def test_h10_matches_galerkin_nodal_exactness():
    # the derivative-pairing projection of the diffusion solution is nodally
    # exact at element boundaries in 1D
    family = basis_family(Mesh1D.uniform(0.0, 1.0, 4, 3))
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    fld = project(fns, CASE.solution, CASE.gradient)
    bounds = family.mesh.boundaries
    assert np.max(np.abs(field_eval(fld, bounds) - CASE.solution(bounds))) < 1e-9


@pytest.mark.parametrize("flavor", [ProjectionFlavor.L2, ProjectionFlavor.H10])
def test_projection_optimality(family, flavor):
    fns = build_dual_functionals(family, flavor)
    if flavor is ProjectionFlavor.L2:
        fld = project(fns, CASE.solution)
    else:
        fld = project(fns, CASE.solution, CASE.gradient)
    x, w = mesh_quadrature(family, 20)
    deriv = 0 if flavor is ProjectionFlavor.L2 else 1
    target = CASE.solution(x) if flavor is ProjectionFlavor.L2 else CASE.gradient(x)
    best = np.dot(w, (target - field_eval(fld, x, deriv=deriv)) ** 2)
    rng = np.random.default_rng(23)
    for _ in range(20):
        pert = fld.coeffs.copy()
        if flavor is ProjectionFlavor.L2:
            pert += 1e-3 * rng.normal(size=pert.size)
        else:
            pert[1:-1] += 1e-3 * rng.normal(size=pert.size - 2)
        other = Field(family, fld.space, pert)
        err = np.dot(w, (target - field_eval(other, x, deriv=deriv)) ** 2)
        assert err >= best - 1e-14


def test_equivalence_with_normal_equations(family):
    x, w = mesh_quadrature(family, 20)
    # L2: edge mass system
    from fsgreens.dualspace import assemble_mass

    fns = build_dual_functionals(family, ProjectionFlavor.L2)
    fld = project(fns, CASE.solution)
    mass = assemble_mass(family, SpaceKind.EDGE)
    rhs = tabulate_edge(family, x).T @ (w * CASE.solution(x))
    assert np.max(np.abs(fld.coeffs - mass.solve(rhs))) < 1e-9
    # H10: interior stiffness system
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    fld = project(fns, CASE.solution, CASE.gradient)
    stiff = assemble_stiffness(family)
    rhs = tabulate_nodal(family, x, deriv=1)[:, 1:-1].T @ (w * CASE.gradient(x))
    assert np.max(np.abs(fld.coeffs[1:-1] - stiff.solve(rhs))) < 1e-9


def test_h10_rejects_nonzero_boundary_values(family):
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    with pytest.raises(ValueError):
        project(fns, lambda x: np.cos(2.0 * np.pi * x))


def test_h10_finite_difference_fallback():
    family = basis_family(Mesh1D.uniform(0.0, 1.0, 3, 2))
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    with_grad = project(fns, CASE.solution, CASE.gradient)
    without = project(fns, CASE.solution)
    assert np.max(np.abs(with_grad.coeffs - without.coeffs)) < 1e-6


def test_source_shortcut_matches_direct_projection(family):
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    direct = project(fns, CASE.solution, CASE.gradient)
    shortcut = h10_project_from_source(fns, CASE.source)
    assert np.max(np.abs(direct.coeffs - shortcut.coeffs)) < 1e-9


def test_source_shortcut_zero_and_polynomial():
    family = basis_family(Mesh1D.uniform(0.0, 1.0, 3, 2))
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    zero = h10_project_from_source(fns, lambda x: np.zeros_like(x))
    assert np.max(np.abs(zero.coeffs)) < 1e-15
    # -u'' = 2 has u = x(1-x), inside the p >= 2 space
    fld = h10_project_from_source(fns, lambda x: np.full_like(x, 2.0))
    x = np.linspace(0.0, 1.0, 41)
    assert np.max(np.abs(field_eval(fld, x) - x * (1.0 - x))) < 1e-10


def test_value_only_projection_matches_pairing(family):
    fns = build_dual_functionals(family, ProjectionFlavor.H10)
    direct = project(fns, CASE.solution, CASE.gradient)
    values = h10_project_values(fns, CASE.solution)
    assert np.max(np.abs(values - direct.coeffs[1:-1])) < 1e-11
