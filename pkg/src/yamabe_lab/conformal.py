"""Backgrounds, pointwise field jets, and the curvature of conformal metrics.

The central object is the metric g_dom = v^-2 g on a domain, where g is a
constant-scalar-curvature background (flat R^n, or the round unit sphere seen
through a stereographic chart) and v > 0 is the reciprocal-power companion of
the conformal factor.  In the orthonormal frame of g_dom obtained by scaling a
g-orthonormal frame by v, the Ricci components are

    R_kl = v^2 B_kl + (n-2) [v v_;kl - 1/2 d_kl |grad v|^2]
           + d_kl [v lap v - (n/2) |grad v|^2]

with B_kl the background Ricci in the orthonormal frame (0 flat, (n-1) d_kl
round sphere), all derivatives covariant in g.  The scalar curvature is the
trace.  Sanity anchor: v = (R^2-|x|^2)/(2R) on the flat ball gives exactly
-(n-1) d_kl (the Poincare metric), which pins the frame convention.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NonpositiveConformalFactor

FLAT = "flat"
SPHERE_CHART = "sphere_chart"


@dataclass(frozen=True)
class Background:
    """Constant-scalar-curvature background geometry.

    kind: FLAT for Euclidean R^n, SPHERE_CHART for the round unit sphere in
    a stereographic chart (chart factor psi(x) = (2/(1+|x|^2))^((n-2)/2)).
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in (FLAT, SPHERE_CHART):
            raise ValueError(f"unknown background kind {self.kind!r}")
        if self.n < 3:
            raise ValueError(f"dimension must be >= 3, got {self.n}")

    @property
    def scalar_curvature(self):
        return 0.0 if self.kind == FLAT else float(self.n * (self.n - 1))

    @property
    def ricci_orthonormal(self):
        """Background Ricci in a g-orthonormal frame (scalar multiple of I)."""
        return 0.0 if self.kind == FLAT else float(self.n - 1)


@dataclass(frozen=True, eq=False)
class Jet2:
    """Value, gradient and Hessian of a scalar field in background chart
    coordinates (plain partial derivatives)."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gradient, dtype=float)
        h = np.asarray(self.hessian, dtype=float)
        h = 0.5 * (h + h.T)  # assembled symmetrically
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "hessian", h)

    @property
    def n(self):
        return self.gradient.shape[0]


@dataclass(frozen=True, eq=False)
class RicciReport:
    """Ricci of g_dom = v^-2 g evaluated on the scaled orthonormal frame."""

    components: np.ndarray
    extremal_abs: float
    trace: float


def jet_power(jet, exponent):
    """Jet of u^a from the jet of u (requires u > 0)."""
    u = jet.value
    if u <= 0.0:
        raise NonpositiveConformalFactor(f"u = {u} <= 0")
    a = float(exponent)
    val = u ** a
    grad = a * u ** (a - 1.0) * jet.gradient
    hess = (a * (a - 1.0) * u ** (a - 2.0) * np.outer(jet.gradient, jet.gradient)
            + a * u ** (a - 1.0) * jet.hessian)
    return Jet2(val, grad, hess)


def v_jet_from_u_jet(jet, n):
    """v = u^(-2/(n-2)); the substitution that regularizes the boundary."""
    return jet_power(jet, -2.0 / (n - 2.0))


def u_from_v(v, n):
    return v ** (-(n - 2.0) / 2.0)


def _covariant_orthonormal_jet(bg, jet, x):
    """Gradient/Hessian of the jet as covariant components in a g-orthonormal
    frame.  Identity for the flat background; for the sphere chart the
    conformal factor e^phi = 2/(1+|x|^2) enters through the Christoffel terms
    of g = e^(2 phi) delta."""
    if bg.kind == FLAT:
        return jet.gradient, jet.hessian
    x = np.asarray(x, dtype=float)
    s2 = float(x @ x)
    ephi = 2.0 / (1.0 + s2)
    dphi = -2.0 * x / (1.0 + s2)
    grad = jet.gradient
    hess = (jet.hessian
            - np.outer(dphi, grad) - np.outer(grad, dphi)
            + np.eye(bg.n) * float(dphi @ grad))
    return grad / ephi, hess / ephi ** 2


def conformal_ricci(bg, jet, x=None):
    """Ricci of g_dom = v^-2 g from the pointwise jet of v.

    jet holds chart partials of v; x is required for the sphere chart (the
    chart factor depends on position) and ignored for the flat background.
    Raises NonpositiveConformalFactor when jet.value <= 0.
    """
    v = jet.value
    if v <= 0.0:
        raise NonpositiveConformalFactor(f"v = {v} <= 0")
    n = bg.n
    if bg.kind == SPHERE_CHART and x is None:
        raise ValueError("sphere chart curvature needs the evaluation point")
    grad, hess = _covariant_orthonormal_jet(bg, jet, x)
    grad2 = float(grad @ grad)
    lap = float(np.trace(hess))
    eye = np.eye(n)
    comp = (v * v * bg.ricci_orthonormal * eye
            + (n - 2.0) * (v * hess - 0.5 * eye * grad2)
            + eye * (v * lap - 0.5 * n * grad2))
    comp = 0.5 * (comp + comp.T)
    eigs = kernels.jacobi_eigvals(comp)
    return RicciReport(components=comp,
                       extremal_abs=float(np.max(np.abs(eigs))),
                       trace=float(np.trace(comp)))


def conformal_scalar(bg, jet, x=None):
    """Scalar curvature of g_dom = v^-2 g at a point (trace of the
    orthonormal-frame Ricci); equals -n(n-1) exactly on solutions."""
    v = jet.value
    if v <= 0.0:
        raise NonpositiveConformalFactor(f"v = {v} <= 0")
    n = bg.n
    grad, hess = _covariant_orthonormal_jet(bg, jet, x)
    grad2 = float(grad @ grad)
    lap = float(np.trace(hess))
    return (v * v * bg.scalar_curvature
            + 2.0 * (n - 1.0) * v * lap
            - n * (n - 1.0) * grad2)


def ricci_nn_solved(bg, jet, direction, x=None):
    """Ricci component R_nn on the unit direction nu for a field that solves
    the curvature equation (the PDE-substituted form of the transformation
    law, which trades the Laplacian for |grad v|^2 and a constant):

        R_nn = v^2 [B_nn - S_g/(2(n-1))] + (n-2) v v_;nn
               - (n-2)/2 |grad v|^2 - n/2
    """
    v = jet.value
    if v <= 0.0:
        raise NonpositiveConformalFactor(f"v = {v} <= 0")
    n = bg.n
    nu = np.asarray(direction, dtype=float)
    nu = nu / np.linalg.norm(nu)
    grad, hess = _covariant_orthonormal_jet(bg, jet, x)
    grad2 = float(grad @ grad)
    vnn = float(nu @ hess @ nu)
    return (v * v * (bg.ricci_orthonormal - bg.scalar_curvature / (2.0 * (n - 1.0)))
            + (n - 2.0) * v * vnn
            - 0.5 * (n - 2.0) * grad2
            - 0.5 * n)


def ricci_extremal_batch(mats):
    """max|eig| and trace for a stack of symmetric Ricci matrices."""
    return kernels.jacobi_extremal_batch(mats)


def flat_ricci_matrices(v, grad, hess, n):
    """Vectorized flat-background transformation law.

    v: (N,), grad: (N, n), hess: (N, n, n) -> (N, n, n) Ricci stacks.
    """
    v = np.asarray(v, dtype=float)
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    grad2 = np.einsum("ki,ki->k", grad, grad)
    lap = np.einsum("kii->k", hess)
    eye = np.eye(n)
    comp = ((n - 2.0) * (v[:, None, None] * hess
                         - 0.5 * grad2[:, None, None] * eye)
            + (v * lap - 0.5 * n * grad2)[:, None, None] * eye)
    return comp
