"""Analytic Green's functions: 1D Poisson, 1D advection-diffusion, 2D Poisson series.

All kernels satisfy homogeneous Dirichlet conditions.  The
advection-diffusion kernel keeps every exponential argument nonpositive so
it stays finite at large Peclet number, and the 2D eigenfunction series
evaluates its sinh ratios the same way so terms beyond n*pi > 700 cannot
overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

_DOMAIN_TOL = 1e-12
DEFAULT_SERIES_TERMS = 100


def _check_unit_domain(*arrays):
    for arr in arrays:
        if np.any(arr < -_DOMAIN_TOL) or np.any(arr > 1.0 + _DOMAIN_TOL):
            raise ValueError("arguments must lie in [0, 1]")


def poisson_green(x, s):
    """Green's function of -u'' on [0, 1] with zero boundary values."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_unit_domain(x, s)
    return np.where(x <= s, x * (1.0 - s), s * (1.0 - x))


def poisson_green_dx(x, s):
    """d/dx of the Poisson kernel; jumps by -1 across x = s."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_unit_domain(x, s)
    return np.where(x < s, 1.0 - s, -s)


def poisson_green_ds(x, s):
    """d/ds of the Poisson kernel; jumps by -1 across s = x."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_unit_domain(x, s)
    return np.where(s < x, 1.0 - x, -x)


def element_green(x, s, a: float, b: float):
    """Local Dirichlet kernel of -u'' on one element [a, b]; zero if x or s lies outside."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    inside = (x >= a) & (x <= b) & (s >= a) & (s <= b)
    lo = np.minimum(x, s)
    hi = np.maximum(x, s)
    val = (lo - a) * (b - hi) / (b - a)
    return np.where(inside, val, 0.0)


def advdiff_green(x, s, c: float, nu: float, width: float = 1.0):
    """Green's function of c u' - nu u'' on [0, width], zero boundary values.

    Written with nonpositive exponents throughout: the response to a
    source at s is exponentially small upstream and forms a plateau of
    height ~1/c downstream, ending in the outflow boundary layer.
    """
    if nu <= 0.0:
        raise ValueError(f"diffusion coefficient must be positive, got {nu}")
    if c == 0.0:
        raise ValueError("advection speed must be nonzero (use the Poisson kernel)")
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(x < -_DOMAIN_TOL * width) or np.any(x > width * (1.0 + _DOMAIN_TOL)):
        raise ValueError(f"x outside [0, {width}]")
    if np.any(s < -_DOMAIN_TOL * width) or np.any(s > width * (1.0 + _DOMAIN_TOL)):
        raise ValueError(f"s outside [0, {width}]")
    if c < 0.0:
        # mirror symmetry maps the negative-speed problem onto the positive one
        return advdiff_green(width - x, width - s, -c, nu, width)
    beta = c / nu
    denom = c * (-np.expm1(-beta * width))
    if beta * width < 0.5:
        # product form: no cancellation when the exponentials are all near 1
        upstream = np.expm1(beta * x) * (-np.expm1(-beta * (width - s))) \
            * np.exp(-beta * s) / denom
    else:
        # shifted form: every argument nonpositive, finite at large Peclet
        upstream = (
            np.exp(-beta * (s - x))
            - np.exp(-beta * (width - x))
            - np.exp(-beta * s)
            + np.exp(-beta * width)
        ) / denom
    downstream = np.expm1(-beta * (width - x)) * np.expm1(-beta * s) / denom
    return np.where(x <= s, upstream, downstream)


def _sinh_ratio(a, b, c):
    """sinh(a) sinh(b) / sinh(c) for 0 <= a, b and a + b <= c, overflow safe."""
    return 0.5 * (
        np.exp(a + b - c) - np.exp(b - a - c) - np.exp(a - b - c) + np.exp(-a - b - c)
    ) / (-np.expm1(-2.0 * c))


def series_term_profile(n: int, y, s2):
    """The y/s2 factor of series term n: sinh(n pi min) sinh(n pi (1-max)) / sinh(n pi)."""
    y = np.asarray(y, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    npi = n * np.pi
    lo = np.minimum(y, s2)
    hi = np.maximum(y, s2)
    return _sinh_ratio(npi * lo, npi * (1.0 - hi), npi)


def poisson2d_green(x, y, s1, s2, num_terms: int = DEFAULT_SERIES_TERMS):
    """Truncated eigenfunction series for the Dirichlet Laplacian on the unit square.

    Sine expansion in the first coordinate, matched sinh profiles in the
    second; symmetric under swapping the field point with the source point
    term by term.
    """
    if num_terms < 1:
        raise ValueError("need at least one series term")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    _check_unit_domain(x, y, s1, s2)
    out = np.zeros(np.broadcast(x, y, s1, s2).shape)
    for n in range(1, num_terms + 1):
        npi = n * np.pi
        out = out + (2.0 / npi) * np.sin(npi * x) * np.sin(npi * s1) * series_term_profile(n, y, s2)
    return out


class KernelKind(Enum):
    POISSON = "poisson"
    ADVECTION_DIFFUSION = "advection-diffusion"


@dataclass(frozen=True)
class GreensKernel1D:
    """A 1D kernel on [0, width] with homogeneous Dirichlet conditions."""

    kind: KernelKind
    advection: float = 0.0
    diffusion: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind is KernelKind.ADVECTION_DIFFUSION:
            if self.diffusion <= 0.0:
                raise ValueError("diffusion coefficient must be positive")
            if self.advection == 0.0:
                raise ValueError("advection speed must be nonzero")

    @classmethod
    def poisson(cls) -> "GreensKernel1D":
        return cls(KernelKind.POISSON)

    @classmethod
    def advection_diffusion(cls, c: float, nu: float, width: float = 1.0) -> "GreensKernel1D":
        return cls(KernelKind.ADVECTION_DIFFUSION, advection=c, diffusion=nu, width=width)

    @property
    def peclet(self) -> float:
        if self.kind is not KernelKind.ADVECTION_DIFFUSION:
            raise ValueError("Peclet number is defined for the advection-diffusion kernel")
        return self.advection * self.width / (2.0 * self.diffusion)

    def __call__(self, x, s):
        if self.kind is KernelKind.POISSON:
            return poisson_green(x, s)
        return advdiff_green(x, s, self.advection, self.diffusion, self.width)

    def derivative_x(self, x, s):
        if self.kind is KernelKind.POISSON:
            return poisson_green_dx(x, s)
        raise NotImplementedError("analytic x-derivative provided for the Poisson kernel only")

    def derivative_s(self, x, s):
        if self.kind is KernelKind.POISSON:
            return poisson_green_ds(x, s)
        raise NotImplementedError("analytic s-derivative provided for the Poisson kernel only")
