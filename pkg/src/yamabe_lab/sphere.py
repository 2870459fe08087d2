"""Stereographic transfer between round-sphere problems and flat ones.

The round unit sphere minus a pole is carried to R^n by stereographic
projection; in the chart the round metric is psi^(4/(n-2)) * delta with

    psi(x) = (2 / (1 + |x|^2))^((n-2)/2).

Covariance of the conformal Laplacian, L_flat(psi u) = psi^((n+2)/(n-2))
L_sphere(u), turns the sphere curvature equation into the flat one for
u_flat = psi * u_sphere, and the conformal metrics agree:
u_sphere^(4/(n-2)) g_sphere == u_flat^(4/(n-2)) delta.  Geodesic caps map to
round balls (or, for a cap centred at the pole, to the complement of one),
so excised-cap problems become excised-ball problems exactly.
"""

from dataclasses import dataclass

import numpy as np

from .conformal import Jet2
from .errors import PoleCollision


@dataclass(frozen=True, eq=False)
class ChartTransfer:
    """A stereographic chart of S^n with a chosen projection pole.

    pole: unit vector in R^(n+1).  The pole maps to infinity; its antipode
    maps to the chart origin.
    """

    n: int
    pole: np.ndarray
    rotation: np.ndarray  # (n+1, n+1), sends pole to the last basis vector

    @property
    def north(self):
        e = np.zeros(self.n + 1)
        e[-1] = 1.0
        return e


def chart(n, pole=None):
    """Build a chart; default pole is the last coordinate direction."""
    if pole is None:
        pole = np.zeros(n + 1)
        pole[-1] = 1.0
    pole = np.asarray(pole, dtype=float)
    pole = pole / np.linalg.norm(pole)
    north = np.zeros(n + 1)
    north[-1] = 1.0
    w = pole - north
    nw = np.linalg.norm(w)
    if nw < 1e-14:
        rot = np.eye(n + 1)
    else:
        w = w / nw
        rot = np.eye(n + 1) - 2.0 * np.outer(w, w)  # Householder reflection
    return ChartTransfer(n=n, pole=pole, rotation=rot)


def project(tr, xi):
    """Sphere point (unit vector, R^(n+1)) -> chart coordinates (R^n)."""
    xi = np.asarray(xi, dtype=float)
    eta = tr.rotation @ xi
    denom = 1.0 - eta[-1]
    if abs(denom) < 1e-12:
        raise PoleCollision("point coincides with the projection pole")
    return eta[:-1] / denom


def lift(tr, x):
    """Chart coordinates -> sphere point."""
    x = np.asarray(x, dtype=float)
    s2 = float(x @ x)
    eta = np.concatenate([2.0 * x, [s2 - 1.0]]) / (1.0 + s2)
    return tr.rotation.T @ eta


def psi(tr, x):
    """Chart factor relating flat and spherical conformal data."""
    s2 = float(np.asarray(x, dtype=float) @ np.asarray(x, dtype=float))
    return (2.0 / (1.0 + s2)) ** ((tr.n - 2) / 2.0)


def psi_jet(tr, x):
    """Exact jet of psi in chart coordinates."""
    x = np.asarray(x, dtype=float)
    n = tr.n
    b = (n - 2) / 2.0
    w = 1.0 + float(x @ x)
    val = (2.0 / w) ** b
    # psi = 2^b * w^-b
    grad = 2.0 ** b * (-b) * w ** (-b - 1.0) * 2.0 * x
    hess = 2.0 ** b * (-b) * (w ** (-b - 1.0) * 2.0 * np.eye(n)
                              + (-b - 1.0) * w ** (-b - 2.0)
                              * 4.0 * np.outer(x, x))
    return Jet2(val, grad, hess)


def to_flat(tr, u_sphere, x):
    """Pointwise transfer rule u_flat = psi * u_sphere on the chart."""
    return psi(tr, x) * u_sphere


def to_sphere(tr, u_flat, x):
    return u_flat / psi(tr, x)


def to_flat_jet(tr, jet_sphere, x):
    """Jet of u_flat = psi * u_sphere from the jet of u_sphere."""
    pj = psi_jet(tr, x)
    val = pj.value * jet_sphere.value
    grad = pj.value * jet_sphere.gradient + jet_sphere.value * pj.gradient
    hess = (pj.value * jet_sphere.hessian + jet_sphere.value * pj.hessian
            + np.outer(pj.gradient, jet_sphere.gradient)
            + np.outer(jet_sphere.gradient, pj.gradient))
    return Jet2(val, grad, hess)


def to_sphere_jet(tr, jet_flat, x):
    pj = psi_jet(tr, x)
    p = pj.value
    val = jet_flat.value / p
    grad = jet_flat.gradient / p - jet_flat.value * pj.gradient / p ** 2
    hess = (jet_flat.hessian / p
            - (np.outer(pj.gradient, jet_flat.gradient)
               + np.outer(jet_flat.gradient, pj.gradient)) / p ** 2
            - jet_flat.value * pj.hessian / p ** 2
            + 2.0 * jet_flat.value * np.outer(pj.gradient, pj.gradient) / p ** 3)
    return Jet2(val, grad, hess)


def conformal_laplacian_sphere(tr, jet_u, x):
    """L_sphere u = -lap_sphere u + n(n-2)/4 * u from chart partials of u.

    Written directly in the chart (lap of the conformal metric e^(2 phi)
    delta), independent of the covariance identity, so the two evaluations
    cross-check each other.
    """
    n = tr.n
    x = np.asarray(x, dtype=float)
    s2 = float(x @ x)
    ephi = 2.0 / (1.0 + s2)
    dphi = -2.0 * x / (1.0 + s2)
    lap_chart = float(np.trace(jet_u.hessian))
    lap_sphere = (lap_chart + (n - 2.0) * float(dphi @ jet_u.gradient)) / ephi ** 2
    return -lap_sphere + 0.25 * n * (n - 2.0) * jet_u.value


def cap_to_chart_ball(tr, center, aperture):
    """Image of the geodesic cap {xi . center >= cos(aperture)} in the chart.

    Returns ("ball", center (n,), radius) when the cap avoids the pole, or
    ("outer", radius) when the cap is centred at the pole (image = complement
    of the ball of that radius).  A cap containing the pole off-centre has no
    bounded chart image and raises PoleCollision.
    """
    center = np.asarray(center, dtype=float)
    center = center / np.linalg.norm(center)
    aperture = float(aperture)
    if not 0.0 < aperture < np.pi / 2:
        raise ValueError("cap aperture must lie in (0, pi/2)")
    cosang = float(tr.pole @ center)
    if cosang > np.cos(aperture) - 1e-14:
        if cosang > 1.0 - 1e-12:
            # cap centred at the pole: boundary circle is a chart sphere
            eta = np.zeros(tr.n + 1)
            eta[0] = np.sin(aperture)
            eta[-1] = np.cos(aperture)
            x = project(tr, tr.rotation.T @ eta)
            return ("outer", float(np.linalg.norm(x)))
        raise PoleCollision(
            "excised cap contains the chart pole off-centre; configure a "
            "rotation that moves the pole out of every cap")
    # two ends of the diameter through the cap centre, in the plane spanned
    # by the pole and the cap centre
    eta_c = tr.rotation @ center
    axis = eta_c - eta_c[-1] * np.concatenate([np.zeros(tr.n), [1.0]])
    na = np.linalg.norm(axis)
    if na < 1e-14:
        # cap centred at the antipode of the pole: chart ball at the origin
        eta = np.zeros(tr.n + 1)
        eta[0] = np.sin(aperture)
        eta[-1] = -np.cos(aperture)
        x = project(tr, tr.rotation.T @ eta)
        return ("ball", np.zeros(tr.n), float(np.linalg.norm(x)))
    # walk the great circle through the cap centre in the plane spanned by
    # the pole and the centre; its two crossings of the cap boundary project
    # to the ends of a diameter of the image ball
    north = np.concatenate([np.zeros(tr.n), [1.0]])
    ca, sa = np.cos(aperture), np.sin(aperture)
    w = north - float(north @ eta_c) * eta_c
    w = w / np.linalg.norm(w)
    xs = []
    for sgn in (1.0, -1.0):
        eta = ca * eta_c + sgn * sa * w
        xs.append(project(tr, tr.rotation.T @ eta))
    x1, x2 = xs
    c = 0.5 * (x1 + x2)
    r = 0.5 * float(np.linalg.norm(x1 - x2))
    return ("ball", c, r)
