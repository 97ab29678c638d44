"""Assembly and application of the fine-scale Green's operator.

The operator is the full kernel minus its resolved part,

    fine kernel = g - (G duals)^T [duals G duals^T]^{-1} (duals G),

built from three ingredients: the kernel lifted through each dual
functional, the Gram matrix of the functionals under the Green's
operator, and the pairing of the functionals with the Green's image of a
residual.

Functionals act through their flavor pairing.  The L2 functionals are
plain densities; the H10 functionals act through the derivative pairing,
so their load on the kernel is the distributional second derivative:
a piecewise-polynomial part plus point sources at the element nodes.
Residuals carry the same structure (smooth part, derivative-kink
breakpoints, point sources/dipoles), which is what makes the
discontinuity-split quadrature exact where naive quadrature fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve

from .basis1d import Field, SpaceKind, element_endpoint_values
from .kernels import GreensKernel1D, KernelKind
from .projection import (
    DualFunctionals,
    ProjectionFlavor,
    functional_deriv_jumps,
    tabulate_functionals,
)
from .quadrature import DEFAULT_QUAD_POINTS, composite_rule, gauss_legendre_rule

_DEFAULT_TOTAL_SAMPLES = 1001


@dataclass(frozen=True)
class SourceTerm:
    """A right-hand-side functional: smooth density plus point terms.

    `breakpoints` are known derivative-kink locations of the smooth part;
    `point_sources`/`point_dipoles` are (location, strength) pairs for
    delta and delta-prime loads.  Green's applications add their analytic
    responses; quadrature never sees them.
    """

    smooth: Callable[[np.ndarray], np.ndarray] | None = None
    breakpoints: tuple = ()
    point_sources: tuple = ()
    point_dipoles: tuple = ()

    @classmethod
    def from_function(cls, f, breakpoints: Sequence[float] = ()) -> "SourceTerm":
        return cls(smooth=f, breakpoints=tuple(float(b) for b in breakpoints))


def _outer_rule(kernel: GreensKernel1D, mesh_boundaries: np.ndarray,
                extra: Sequence[float], quad_points: int):
    bounds = np.unique(np.concatenate((mesh_boundaries, np.asarray(extra, dtype=float))))
    return composite_rule(gauss_legendre_rule(quad_points), bounds)


def green_apply(kernel: GreensKernel1D, src: SourceTerm, x,
                quad_points: int = DEFAULT_QUAD_POINTS,
                mesh_boundaries: Sequence[float] | None = None):
    """Evaluate the Green's operator applied to a source at the points x.

    The s-integral is split at the kernel kink s = x, the source's own
    breakpoints, and any supplied mesh boundaries; point sources and
    dipoles contribute kernel and kernel-derivative values directly.
    """
    scalar = np.isscalar(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = 0.0, kernel.width
    base = np.unique(np.concatenate((
        np.asarray(mesh_boundaries if mesh_boundaries is not None else [lo, hi], dtype=float),
        np.asarray(src.breakpoints, dtype=float),
        [lo, hi],
    )))
    rule = gauss_legendre_rule(quad_points)
    out = np.zeros_like(x)
    if src.smooth is not None:
        for i, xi in enumerate(x):
            cut = np.unique(np.concatenate((base, [xi])))
            cut = cut[(cut >= lo) & (cut <= hi)]
            s, w = composite_rule(rule, cut)
            out[i] = np.dot(w, kernel(xi, s) * np.asarray(src.smooth(s), dtype=float))
    for loc, q in src.point_sources:
        out += q * kernel(x, loc)
    for loc, q in src.point_dipoles:
        gs = kernel.derivative_s(x, loc)
        if loc <= lo + 1e-14 * kernel.width:
            # Evaluation exactly on a left-boundary dipole takes the limit
            # from inside the domain, matching the element-assignment
            # convention used for discontinuous fields.
            gs = np.where(x == loc, 1.0 - loc, gs)
        out -= q * gs
    return float(out[0]) if scalar else out


def functional_load(fns: DualFunctionals):
    """The load each functional places on the kernel, as a SourceTerm batch.

    Returns (smooth_tab, point_locs, point_strengths) where smooth_tab(s)
    tabulates all loads' smooth densities, point_locs lists delta
    locations and point_strengths is the (len(locs), n) strength matrix.
    For the L2 flavor the load is the dual function itself; for H10 it is
    the negative distributional second derivative of the functional.
    """
    mesh = fns.family.mesh
    if fns.flavor is ProjectionFlavor.L2:
        smooth = lambda s: tabulate_functionals(fns, s)
        return smooth, np.empty(0), np.empty((0, fns.size))
    smooth = lambda s: -tabulate_functionals(fns, s, deriv=2)
    a, b = mesh.a, mesh.b
    deriv_a = tabulate_functionals(fns, np.array([a]), deriv=1)[0]
    deriv_b = tabulate_functionals(fns, np.array([b]), deriv=1)[0]
    strengths = np.vstack([-deriv_a, functional_deriv_jumps(fns), deriv_b])
    return smooth, mesh.boundaries.copy(), strengths


def dual_representers(kernel: GreensKernel1D, fns: DualFunctionals, s,
                      split: bool = True,
                      quad_points: int = DEFAULT_QUAD_POINTS,
                      deriv: int = 0) -> np.ndarray:
    """Riesz representers of (duals G) evaluated at the points s.

    Entry (q, j) is the pairing of functional j with the kernel column at
    s_q: the x-integral of the functional derivative against the kernel's
    x-derivative (H10) or of the functional against the kernel (L2).  With
    `split` the x-integral is cut at the kernel kink x = s_q, which is the
    fix for the otherwise badly captured derivative discontinuity.  For
    the H10/Poisson pairing the result is the functionals themselves.
    `deriv=1` returns the s-derivative of the representers (dipole loads).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if kernel.kind is not KernelKind.POISSON:
        raise NotImplementedError("fine-scale assembly is built on the Poisson kernel")
    mesh = fns.family.mesh
    rule = gauss_legendre_rule(quad_points)
    out = np.empty((s.size, fns.size))
    if fns.flavor is ProjectionFlavor.H10:
        pair_tab = lambda xq: tabulate_functionals(fns, xq, deriv=1)
        # d2 g / dx ds is -1 on both sides of the diagonal
        kern = kernel.derivative_x if deriv == 0 else (lambda xq, sq: -np.ones_like(xq))
    else:
        pair_tab = lambda xq: tabulate_functionals(fns, xq)
        kern = kernel if deriv == 0 else kernel.derivative_s
    for qi, sq in enumerate(s):
        cuts = mesh.boundaries
        if split:
            cuts = np.unique(np.concatenate((cuts, [sq])))
            cuts = cuts[(cuts >= mesh.a) & (cuts <= mesh.b)]
        xq, wq = composite_rule(rule, cuts)
        out[qi] = pair_tab(xq).T @ (wq * kern(xq, sq))
    if fns.flavor is ProjectionFlavor.H10 and deriv == 1:
        # Leibniz term from the moving kink: the kernel's x-derivative drops
        # by one across x = s, so the split boundary's motion contributes
        # the functional derivative itself.
        out += tabulate_functionals(fns, s, deriv=1)
    return out


def apply_dual_green(kernel: GreensKernel1D, fns: DualFunctionals, src: SourceTerm,
                     split: bool = True,
                     quad_points: int = DEFAULT_QUAD_POINTS) -> np.ndarray:
    """Pair every functional with the Green's image of a source.

    Computed by swapping integration order: the source is integrated
    against the representers, so point sources and dipoles reduce to
    representer (derivative) evaluations.
    """
    mesh = fns.family.mesh
    out = np.zeros(fns.size)
    if src.smooth is not None:
        s, w = _outer_rule(kernel, mesh.boundaries, src.breakpoints, quad_points)
        rep = dual_representers(kernel, fns, s, split=split, quad_points=quad_points)
        out += rep.T @ (w * np.asarray(src.smooth(s), dtype=float))
    if src.point_sources:
        locs = np.array([loc for loc, _ in src.point_sources])
        qs = np.array([q for _, q in src.point_sources])
        rep = dual_representers(kernel, fns, locs, split=split, quad_points=quad_points)
        out += rep.T @ qs
    if src.point_dipoles:
        locs = np.array([loc for loc, _ in src.point_dipoles])
        qs = np.array([q for _, q in src.point_dipoles])
        drep = dual_representers(kernel, fns, locs, split=split,
                                 quad_points=quad_points, deriv=1)
        out -= drep.T @ qs
    return out


@dataclass(frozen=True)
class PiecewiseCubic:
    """Cubic interpolants glued across elements, kink-safe at the joints.

    Evaluation routes each point to its element's spline (points on an
    interior joint go left, matching the field-evaluation convention).
    Derivatives and antiderivatives map element by element, so functions
    with derivative jumps at the joints are handled exactly.
    """

    boundaries: np.ndarray
    splines: tuple

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.clip(np.searchsorted(self.boundaries, x, side="left") - 1,
                      0, len(self.splines) - 1)
        out = np.empty_like(x)
        for n in range(len(self.splines)):
            mask = idx == n
            if np.any(mask):
                out[mask] = self.splines[n](x[mask])
        return out

    def derivative(self) -> "PiecewiseCubic":
        return PiecewiseCubic(self.boundaries,
                              tuple(s.derivative() for s in self.splines))

    def antiderivative(self) -> "PiecewiseCubic":
        pieces = []
        offset = 0.0
        for n, spline in enumerate(self.splines):
            anti = spline.antiderivative()
            lo, hi = self.boundaries[n], self.boundaries[n + 1]
            shift = offset - float(anti(lo))
            anti.c[-1] += shift
            pieces.append(anti)
            offset = float(anti(hi))
        return PiecewiseCubic(self.boundaries, tuple(pieces))


def piecewise_interpolant(boundaries, grid, values) -> PiecewiseCubic:
    """Per-element cubic interpolant of samples on an element-aligned grid.

    Every element must contain at least four grid points; interior joint
    points are shared between the neighbouring pieces.
    """
    boundaries = np.asarray(boundaries, dtype=float)
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    splines = []
    for n in range(boundaries.size - 1):
        lo, hi = boundaries[n], boundaries[n + 1]
        mask = (grid >= lo - 1e-14) & (grid <= hi + 1e-14)
        if np.count_nonzero(mask) < 4:
            raise ValueError("need at least four samples per element")
        splines.append(CubicSpline(grid[mask], values[mask]))
    return PiecewiseCubic(boundaries, tuple(splines))


def _sample_piecewise(boundaries: np.ndarray, values_fn, samples_per_element: int):
    splines = []
    for n in range(len(boundaries) - 1):
        xs = np.linspace(boundaries[n], boundaries[n + 1], samples_per_element)
        splines.append(CubicSpline(xs, values_fn(xs)))
    return splines


@dataclass(frozen=True)
class FineScaleOperator:
    """Precomputed fine-scale Green's operator for one kernel and dual set.

    Holds the lifted functionals (sampled per element with cubic
    interpolation plus a direct quadrature path), the factorized Gram
    matrix, and the flavor pairing used for all dual applications.
    """

    kernel: GreensKernel1D
    functionals: DualFunctionals
    quad_points: int
    lifted: tuple
    gram: np.ndarray
    _lu: tuple = field(repr=False, default=None)

    @property
    def flavor(self) -> ProjectionFlavor:
        return self.functionals.flavor

    @property
    def size(self) -> int:
        return self.functionals.size

    def lifted_tab(self, x) -> np.ndarray:
        """Tabulate every lifted functional at x from the cached splines."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.column_stack([lift(x) for lift in self.lifted])

    def solve_gram(self, rhs: np.ndarray) -> np.ndarray:
        return lu_solve(self._lu, np.asarray(rhs, dtype=float))


def lift_functionals_direct(kernel: GreensKernel1D, fns: DualFunctionals, x,
                            quad_points: int = DEFAULT_QUAD_POINTS) -> np.ndarray:
    """Direct-quadrature evaluation of every lifted functional at x.

    Verification path for the cached splines: applies the Green's operator
    to each functional's load without interpolation.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mesh = fns.family.mesh
    smooth_tab, locs, strengths = functional_load(fns)
    rule = gauss_legendre_rule(quad_points)
    out = np.zeros((x.size, fns.size))
    for i, xi in enumerate(x):
        cuts = np.unique(np.concatenate((mesh.boundaries, [xi])))
        cuts = cuts[(cuts >= mesh.a) & (cuts <= mesh.b)]
        s, w = composite_rule(rule, cuts)
        out[i] = smooth_tab(s).T @ (w * kernel(xi, s))
    for k, loc in enumerate(np.atleast_1d(locs)):
        out += np.outer(kernel(x, loc), strengths[k])
    return out


def build_fine_scale_operator(kernel: GreensKernel1D, fns: DualFunctionals,
                              quad_points: int = DEFAULT_QUAD_POINTS,
                              samples_per_element: int | None = None) -> FineScaleOperator:
    """Assemble the lifted functionals and the factorized Gram matrix."""
    if kernel.kind is not KernelKind.POISSON:
        raise NotImplementedError("fine-scale assembly is built on the Poisson kernel")
    mesh = fns.family.mesh
    if abs(mesh.a) > 1e-14 or abs(mesh.b - kernel.width) > 1e-14:
        raise ValueError("mesh must cover the kernel domain [0, width]")
    if samples_per_element is None:
        samples_per_element = max(9, (_DEFAULT_TOTAL_SAMPLES - 1) // mesh.num_elements + 1)

    lifted_dense = lambda xs: lift_functionals_direct(kernel, fns, xs, quad_points)
    per_elem = []
    for n in range(mesh.num_elements):
        xs = np.linspace(mesh.boundaries[n], mesh.boundaries[n + 1], samples_per_element)
        per_elem.append(lifted_dense(xs))
    lifted = []
    for j in range(fns.size):
        splines = []
        for n in range(mesh.num_elements):
            xs = np.linspace(mesh.boundaries[n], mesh.boundaries[n + 1], samples_per_element)
            splines.append(CubicSpline(xs, per_elem[n][:, j]))
        lifted.append(PiecewiseCubic(mesh.boundaries.copy(), tuple(splines)))

    smooth_tab, locs, strengths = functional_load(fns)
    s, w = _outer_rule(kernel, mesh.boundaries, (), quad_points)
    rep = dual_representers(kernel, fns, s, split=True, quad_points=quad_points)
    gram = rep.T @ (w[:, None] * smooth_tab(s))
    if np.atleast_1d(locs).size:
        rep_locs = dual_representers(kernel, fns, np.atleast_1d(locs), split=True,
                                     quad_points=quad_points)
        gram += rep_locs.T @ strengths
    if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > 1e14:
        raise ValueError("singular dual Gram matrix: assembly defect")
    lu = lu_factor(gram)
    return FineScaleOperator(kernel, fns, quad_points, tuple(lifted), gram, lu)


def fine_scale_eval(op: FineScaleOperator, x, s, split: bool = True) -> np.ndarray:
    """Evaluate the fine-scale kernel on the grid x (rows) by s (columns)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    full = op.kernel(xs[:, None], ss[None, :])
    rep = dual_representers(op.kernel, op.functionals, ss, split=split,
                            quad_points=op.quad_points)
    corr = op.lifted_tab(xs) @ op.solve_gram(rep.T)
    out = full - corr
    if np.isscalar(x) and np.isscalar(s):
        return float(out[0, 0])
    return out


def reconstruct_fine_scales(op: FineScaleOperator, residual: SourceTerm, grid,
                            split: bool = True) -> np.ndarray:
    """Unresolved scales: the fine-scale operator applied to a residual, on a grid."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    lifted_residual = green_apply(op.kernel, residual, grid,
                                  quad_points=op.quad_points,
                                  mesh_boundaries=op.functionals.family.mesh.boundaries)
    data = apply_dual_green(op.kernel, op.functionals, residual, split=split,
                            quad_points=op.quad_points)
    return lifted_residual - op.lifted_tab(grid) @ op.solve_gram(data)


def resolved_basis_reproduction(op: FineScaleOperator, x) -> np.ndarray:
    """Tabulate (G duals)^T [Gram]^{-1} at x; column i is reconstruction function i.

    For the H10/Poisson pairing these coincide with the interior nodal
    basis functions.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return op.solve_gram(op.lifted_tab(x).T).T


def residual_from_field(u_bar: Field, source: Callable[[np.ndarray], np.ndarray],
                        scale: float = 1.0) -> SourceTerm:
    """Coarse-scale residual of -u'' = source: the source plus the field's
    distributional second derivative.

    Nodal fields contribute a piecewise second derivative with element
    boundaries as breakpoints; their interface delta loads are omitted
    because mesh-node kernel columns are resolved exactly and therefore
    annihilated.  Edge fields are discontinuous, so their interface and
    boundary jump terms enter as explicit point sources and dipoles.
    """
    family = u_bar.family
    mesh = family.mesh
    inner_breaks = tuple(mesh.boundaries[1:-1])

    if u_bar.space is SpaceKind.NODAL:
        from .basis1d import tabulate_nodal

        def smooth(s):
            return scale * np.asarray(source(s), dtype=float) + \
                tabulate_nodal(family, s, deriv=2) @ u_bar.coeffs

        return SourceTerm(smooth=smooth, breakpoints=inner_breaks)

    if u_bar.space is not SpaceKind.EDGE:
        raise ValueError("residual assembly handles primal nodal/edge fields")

    from .basis1d import tabulate_edge

    def smooth(s):
        return scale * np.asarray(source(s), dtype=float) + \
            tabulate_edge(family, s, deriv=2) @ u_bar.coeffs

    val_l, val_r = element_endpoint_values(u_bar, deriv=0)
    der_l, der_r = element_endpoint_values(u_bar, deriv=1)
    sources, dipoles = [], []
    for k in range(mesh.num_elements + 1):
        right_v = val_l[k] if k < mesh.num_elements else 0.0
        left_v = val_r[k - 1] if k > 0 else 0.0
        right_d = der_l[k] if k < mesh.num_elements else 0.0
        left_d = der_r[k - 1] if k > 0 else 0.0
        loc = mesh.boundaries[k]
        sources.append((loc, right_d - left_d))
        dipoles.append((loc, right_v - left_v))
    return SourceTerm(smooth=smooth, breakpoints=inner_breaks,
                      point_sources=tuple(sources), point_dipoles=tuple(dipoles))
