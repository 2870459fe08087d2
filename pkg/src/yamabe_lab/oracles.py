"""Closed-form solutions and harmonic building blocks.

These are the trust anchors of the package: boundary data, sub/supersolution
barriers, and ground truth for solver and curvature tests.  All jets are
hand-coded exact derivatives, never finite differences.

With b = (n-2)/2, the catalogue is

    exterior ball   u = (2r / (|x-p|^2 - r^2))^b          on |x-p| > r
    ball (interior) u = (2R / (R^2 - |x|^2))^b            on |x| < R
    half space      u = x_n^-b                            on x_n > 0
    tube complement u = c_k |x''|^-b,  x'' = last n-k     on |x''| > 0
                    c_k = [(k - (n-2)/2) * 2/n]^((n-2)/4)
    pole            u = c |x-x0|^(2-n)        (harmonic)
    multipole       u = sum_j a_j |x-p_j|^(2-n), a_j > 0  (harmonic)
    two-ball sum    u = exterior(p1,r1) + exterior(p2,r2) (supersolution)

The first four solve lap u = n(n-2)/4 * u^((n+2)/(n-2)) exactly; their
companions v = u^(-2/(n-2)) are degree <= 2 polynomials, so second-order
discretizations reproduce them to rounding (exploited throughout the tests).
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .conformal import Jet2, v_jet_from_u_jet
from .errors import OutsideDomain

EXTERIOR_BALL = "exterior_ball"
POINCARE_BALL = "poincare_ball"
HALF_SPACE = "half_space"
TUBE_COMPLEMENT = "tube_complement"
GREEN_POLE = "green_pole"
MULTIPOLE = "multipole"
TWO_BALL_SUPER = "two_ball_super"

_YAMABE_KINDS = (EXTERIOR_BALL, POINCARE_BALL, HALF_SPACE, TUBE_COMPLEMENT)
_HARMONIC_KINDS = (GREEN_POLE, MULTIPOLE)


@dataclass(frozen=True, eq=False)
class OracleSpec:
    """One closed form, pinned to a dimension.

    Parameter slots by kind:
      exterior_ball   center (n,), radius
      poincare_ball   radius (centered at the origin)
      half_space      none
      tube_complement tube_k (integer, (n-2)/2 < k <= n-2)
      green_pole      poles (1, n), coefficients (1,)
      multipole       poles (m, n), coefficients (m,) all > 0
      two_ball_super  centers (2, n), radii (2,)
    """

    kind: str
    n: int
    center: np.ndarray = None
    radius: float = 0.0
    tube_k: int = 0
    poles: np.ndarray = None
    coefficients: np.ndarray = None
    centers: np.ndarray = None
    radii: Tuple[float, float] = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"dimension must be >= 3, got {self.n}")
        if self.kind in (EXTERIOR_BALL, POINCARE_BALL) and self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.kind == EXTERIOR_BALL:
            object.__setattr__(self, "center",
                               np.asarray(self.center, dtype=float))
        if self.kind == TUBE_COMPLEMENT:
            k = self.tube_k
            if k != int(k) or not ((self.n - 2) / 2.0 < k <= self.n - 2):
                raise ValueError(
                    f"tube codimension parameter k={k} outside "
                    f"({(self.n - 2) / 2.0}, {self.n - 2}] for n={self.n}")
        if self.kind in (GREEN_POLE, MULTIPOLE):
            object.__setattr__(self, "poles",
                               np.atleast_2d(np.asarray(self.poles, dtype=float)))
            object.__setattr__(self, "coefficients",
                               np.atleast_1d(np.asarray(self.coefficients, dtype=float)))
            if np.any(self.coefficients <= 0.0):
                raise ValueError("pole coefficients must be strictly positive")
        if self.kind == TWO_BALL_SUPER:
            object.__setattr__(self, "centers",
                               np.asarray(self.centers, dtype=float))
            if min(self.radii) <= 0:
                raise ValueError("ball radii must be positive")


def exterior_ball(n, center, radius):
    return OracleSpec(EXTERIOR_BALL, n, center=center, radius=float(radius))


def poincare_ball(n, radius=1.0):
    return OracleSpec(POINCARE_BALL, n, radius=float(radius))


def half_space(n):
    return OracleSpec(HALF_SPACE, n)


def tube_complement(n, k):
    return OracleSpec(TUBE_COMPLEMENT, n, tube_k=int(k))


def green_pole(n, x0, c=1.0):
    return OracleSpec(GREEN_POLE, n, poles=np.atleast_2d(x0),
                      coefficients=np.atleast_1d(float(c)))


def multipole(n, poles, coefficients):
    return OracleSpec(MULTIPOLE, n, poles=poles, coefficients=coefficients)


def two_ball_super(n, p1, r1, p2, r2):
    return OracleSpec(TWO_BALL_SUPER, n,
                      centers=np.stack([np.asarray(p1, dtype=float),
                                        np.asarray(p2, dtype=float)]),
                      radii=(float(r1), float(r2)))


def tube_amplitude(n, k):
    """c_k in the tube closed form."""
    return ((k - (n - 2) / 2.0) * 2.0 / n) ** ((n - 2) / 4.0)


def _check_inside(spec, x):
    n = spec.n
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"point has shape {x.shape}, expected ({n},)")
    k = spec.kind
    if k == EXTERIOR_BALL:
        if np.linalg.norm(x - spec.center) <= spec.radius:
            raise OutsideDomain("point not strictly outside the ball")
    elif k == POINCARE_BALL:
        if np.linalg.norm(x) >= spec.radius:
            raise OutsideDomain("point not strictly inside the ball")
    elif k == HALF_SPACE:
        if x[-1] <= 0.0:
            raise OutsideDomain("point not in the upper half space")
    elif k == TUBE_COMPLEMENT:
        if np.linalg.norm(x[spec.tube_k:]) <= 0.0:
            raise OutsideDomain("point on the tube axis")
    elif k in (GREEN_POLE, MULTIPOLE):
        if np.any(np.linalg.norm(spec.poles - x, axis=1) <= 0.0):
            raise OutsideDomain("point coincides with a pole")
    elif k == TWO_BALL_SUPER:
        d = np.linalg.norm(spec.centers - x, axis=1)
        if d[0] <= spec.radii[0] or d[1] <= spec.radii[1]:
            raise OutsideDomain("point not strictly outside both balls")
    return x


def _power_jet(y, coeff, a):
    """Jet of coeff * |y|^a in the coordinates of y."""
    m = y.shape[0]
    s2 = float(y @ y)
    s = np.sqrt(s2)
    val = coeff * s ** a
    grad = coeff * a * s ** (a - 2.0) * y
    hess = coeff * a * (s ** (a - 2.0) * np.eye(m)
                        + (a - 2.0) * s ** (a - 4.0) * np.outer(y, y))
    return val, grad, hess


def _quad_power_jet(w, gw, hw, coeff, a):
    """Jet of coeff * w^a from the jet (w, grad w, hess w)."""
    val = coeff * w ** a
    grad = coeff * a * w ** (a - 1.0) * gw
    hess = coeff * a * ((a - 1.0) * w ** (a - 2.0) * np.outer(gw, gw)
                        + w ** (a - 1.0) * hw)
    return val, grad, hess


def oracle_u_jet(spec, x):
    """Exact (value, gradient, Hessian) of u at x."""
    x = _check_inside(spec, x)
    n = spec.n
    b = (n - 2) / 2.0
    k = spec.kind
    if k == EXTERIOR_BALL:
        y = x - spec.center
        w = float(y @ y) - spec.radius ** 2
        val, grad, hess = _quad_power_jet(w, 2.0 * y, 2.0 * np.eye(n),
                                          (2.0 * spec.radius) ** b, -b)
    elif k == POINCARE_BALL:
        w = spec.radius ** 2 - float(x @ x)
        val, grad, hess = _quad_power_jet(w, -2.0 * x, -2.0 * np.eye(n),
                                          (2.0 * spec.radius) ** b, -b)
    elif k == HALF_SPACE:
        t = x[-1]
        val = t ** (-b)
        grad = np.zeros(n)
        grad[-1] = -b * t ** (-b - 1.0)
        hess = np.zeros((n, n))
        hess[-1, -1] = b * (b + 1.0) * t ** (-b - 2.0)
    elif k == TUBE_COMPLEMENT:
        kk = spec.tube_k
        y = x[kk:]
        val, gsub, hsub = _power_jet(y, tube_amplitude(n, kk), -b)
        grad = np.zeros(n)
        grad[kk:] = gsub
        hess = np.zeros((n, n))
        hess[kk:, kk:] = hsub
    elif k in (GREEN_POLE, MULTIPOLE):
        val = 0.0
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        for pole, c in zip(spec.poles, spec.coefficients):
            v_, g_, h_ = _power_jet(x - pole, float(c), 2.0 - n)
            val += v_
            grad += g_
            hess += h_
    elif k == TWO_BALL_SUPER:
        j1 = oracle_u_jet(exterior_ball(n, spec.centers[0], spec.radii[0]), x)
        j2 = oracle_u_jet(exterior_ball(n, spec.centers[1], spec.radii[1]), x)
        return Jet2(j1.value + j2.value, j1.gradient + j2.gradient,
                    j1.hessian + j2.hessian)
    else:
        raise ValueError(f"unknown oracle kind {k!r}")
    return Jet2(val, grad, hess)


def oracle_u(spec, x):
    """Closed-form value of u at x."""
    x = _check_inside(spec, x)
    n = spec.n
    b = (n - 2) / 2.0
    k = spec.kind
    if k == EXTERIOR_BALL:
        s2 = float((x - spec.center) @ (x - spec.center))
        return (2.0 * spec.radius / (s2 - spec.radius ** 2)) ** b
    if k == POINCARE_BALL:
        return (2.0 * spec.radius / (spec.radius ** 2 - float(x @ x))) ** b
    if k == HALF_SPACE:
        return x[-1] ** (-b)
    if k == TUBE_COMPLEMENT:
        s = np.linalg.norm(x[spec.tube_k:])
        return tube_amplitude(n, spec.tube_k) * s ** (-b)
    if k in (GREEN_POLE, MULTIPOLE):
        d = np.linalg.norm(spec.poles - x, axis=1)
        return float(np.sum(spec.coefficients * d ** (2.0 - n)))
    if k == TWO_BALL_SUPER:
        return (oracle_u(exterior_ball(n, spec.centers[0], spec.radii[0]), x)
                + oracle_u(exterior_ball(n, spec.centers[1], spec.radii[1]), x))
    raise ValueError(f"unknown oracle kind {k!r}")


def oracle_v(spec, x):
    """v = u^(-2/(n-2)), in simplified closed form where exact."""
    x = _check_inside(spec, x)
    n = spec.n
    k = spec.kind
    if k == EXTERIOR_BALL:
        s2 = float((x - spec.center) @ (x - spec.center))
        return (s2 - spec.radius ** 2) / (2.0 * spec.radius)
    if k == POINCARE_BALL:
        return (spec.radius ** 2 - float(x @ x)) / (2.0 * spec.radius)
    if k == HALF_SPACE:
        return float(x[-1])
    if k == TUBE_COMPLEMENT:
        s = np.linalg.norm(x[spec.tube_k:])
        return float(s * ((2.0 / n) * (spec.tube_k - (n - 2) / 2.0)) ** -0.5)
    return oracle_u(spec, x) ** (-2.0 / (n - 2.0))


def oracle_v_jet(spec, x):
    """Exact jet of v.  Quadratic closed forms are differentiated directly;
    the rest go through the power-law jet transform."""
    x = _check_inside(spec, x)
    n = spec.n
    k = spec.kind
    if k == EXTERIOR_BALL:
        y = x - spec.center
        r = spec.radius
        return Jet2((float(y @ y) - r * r) / (2.0 * r), y / r, np.eye(n) / r)
    if k == POINCARE_BALL:
        r = spec.radius
        return Jet2((r * r - float(x @ x)) / (2.0 * r), -x / r, -np.eye(n) / r)
    if k == HALF_SPACE:
        grad = np.zeros(n)
        grad[-1] = 1.0
        return Jet2(float(x[-1]), grad, np.zeros((n, n)))
    if k == TUBE_COMPLEMENT:
        kk = spec.tube_k
        lam = ((2.0 / n) * (kk - (n - 2) / 2.0)) ** -0.5
        y = x[kk:]
        val, gsub, hsub = _power_jet(y, lam, 1.0)
        grad = np.zeros(n)
        grad[kk:] = gsub
        hess = np.zeros((n, n))
        hess[kk:, kk:] = hsub
        return Jet2(val, grad, hess)
    return v_jet_from_u_jet(oracle_u_jet(spec, x), n)


def oracle_residual(spec, x):
    """Equation residual at x from analytic jets.

    Yamabe oracles: lap u - n(n-2)/4 * u^((n+2)/(n-2)), which vanishes.
    Harmonic oracles: lap u.
    The two-ball sum reports the same Yamabe residual; it is a supersolution,
    so the value is <= 0 rather than zero.
    """
    jet = oracle_u_jet(spec, x)
    lap = float(np.trace(jet.hessian))
    if spec.kind in _HARMONIC_KINDS:
        return lap
    n = spec.n
    return lap - 0.25 * n * (n - 2.0) * jet.value ** ((n + 2.0) / (n - 2.0))
