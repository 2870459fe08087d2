"""Stereographic transfer: round trips, conformal-Laplacian covariance,
cap images."""

import numpy as np
import pytest

from yamabe_lab import conformal as cf
from yamabe_lab import oracles as oc
from yamabe_lab import sphere as sp
from yamabe_lab.errors import PoleCollision


def test_point_round_trip():
    tr = sp.chart(4)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=4) * 3.0
        assert np.allclose(sp.project(tr, sp.lift(tr, x)), x, atol=1e-12)
        xi = rng.normal(size=5)
        xi /= np.linalg.norm(xi)
        if abs(xi @ tr.pole - 1.0) < 1e-6:
            continue
        assert np.allclose(sp.lift(tr, sp.project(tr, xi)), xi, atol=1e-12)


def test_constant_field_round_trip():
    tr = sp.chart(3)
    x = np.array([0.2, -1.0, 0.4])
    assert sp.to_sphere(tr, sp.to_flat(tr, 1.0, x), x) == pytest.approx(1.0, abs=1e-15)


def test_rotated_pole_chart():
    pole = np.array([1.0, 1.0, 0.0, 0.0, 1.0])
    tr = sp.chart(4, pole)
    # the pole's antipode lands at the chart origin
    anti = -tr.pole
    assert np.allclose(sp.project(tr, anti), np.zeros(4), atol=1e-12)
    with pytest.raises(PoleCollision):
        sp.project(tr, tr.pole)


def test_green_pole_annihilated_on_sphere():
    # transfer a flat fundamental solution; the sphere conformal Laplacian,
    # evaluated directly in the chart, must annihilate it away from the pole
    n = 4
    tr = sp.chart(n)
    x0 = np.array([0.5, 0.0, 0.0, 0.0])
    gp = oc.green_pole(n, x0, 1.0)
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 60:
        x = rng.normal(size=n) * 1.5
        if np.linalg.norm(x - x0) < 0.3:
            continue
        jet_sphere = sp.to_sphere_jet(tr, oc.oracle_u_jet(gp, x), x)
        assert abs(sp.conformal_laplacian_sphere(tr, jet_sphere, x)) <= 1e-8
        checked += 1


def test_transferred_solution_is_hyperbolic_via_sphere_route():
    # u_flat solves the flat equation; u_sphere = u_flat / psi solves the
    # sphere equation and defines the *same* conformal metric, so the
    # sphere-background curvature path must report -(n-1) I as well
    n = 4
    tr = sp.chart(n)
    bg_s = cf.Background(cf.SPHERE_CHART, n)
    eb = oc.exterior_ball(n, np.zeros(n), 1.0)
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.normal(size=n) * 2.0
        if np.linalg.norm(x) < 1.2:
            continue
        jet_u_sphere = sp.to_sphere_jet(tr, oc.oracle_u_jet(eb, x), x)
        jet_v_sphere = cf.v_jet_from_u_jet(jet_u_sphere, n)
        rep = cf.conformal_ricci(bg_s, jet_v_sphere, x)
        assert np.max(np.abs(rep.components + (n - 1) * np.eye(n))) <= 1e-9
        s = cf.conformal_scalar(bg_s, jet_v_sphere, x)
        assert s == pytest.approx(-n * (n - 1), abs=1e-9)


def test_field_jet_round_trip():
    n = 4
    tr = sp.chart(n)
    gp = oc.green_pole(n, np.array([0.3, 0.2, 0.0, 0.0]), 2.0)
    x = np.array([1.1, -0.4, 0.8, 0.2])
    jet = oc.oracle_u_jet(gp, x)
    back = sp.to_flat_jet(tr, sp.to_sphere_jet(tr, jet, x), x)
    assert back.value == pytest.approx(jet.value, rel=1e-12)
    assert np.allclose(back.gradient, jet.gradient, rtol=1e-12, atol=1e-12)
    assert np.allclose(back.hessian, jet.hessian, rtol=1e-11, atol=1e-11)


def test_cap_maps_to_chart_ball():
    tr = sp.chart(4)
    rng = np.random.default_rng(3)
    center = sp.lift(tr, np.array([0.7, -0.2, 0.5, 0.0]))
    kind, c, r = sp.cap_to_chart_ball(tr, center, 0.35)
    assert kind == "ball"
    for _ in range(128):
        w = rng.normal(size=5)
        w -= (w @ center) * center
        w /= np.linalg.norm(w)
        xi = np.cos(0.35) * center + np.sin(0.35) * w
        x = sp.project(tr, xi)
        assert np.linalg.norm(x - c) == pytest.approx(r, abs=1e-12)


def test_cap_at_pole_is_outer_boundary():
    tr = sp.chart(3)
    kind, radius = sp.cap_to_chart_ball(tr, tr.pole, 0.4)
    assert kind == "outer"
    assert radius > 1.0


def test_cap_containing_pole_off_centre_collides():
    tr = sp.chart(3)
    tilted = np.array([0.05, 0.0, 0.0, 1.0])
    with pytest.raises(PoleCollision):
        sp.cap_to_chart_ball(tr, tilted, 0.4)


def test_two_cap_problem_solved_through_the_chart():
    # two antipodal caps on S^3 transfer to a flat spherical shell; solving
    # there and pulling back yields a sphere-background solution, checked
    # through the curvature normalization at interior points
    import yamabe_lab.radial as radial
    from yamabe_lab.domain import SolverParams
    from yamabe_lab.fields import jet2

    n = 3
    tr = sp.chart(n)
    kind_a, r_outer = sp.cap_to_chart_ball(tr, tr.pole, 0.5)
    kind_b, c_b, r_inner = sp.cap_to_chart_ball(tr, -tr.pole, 0.5)
    assert kind_a == "outer" and kind_b == "ball"
    assert np.allclose(c_b, 0.0, atol=1e-14)
    geom = radial.annulus_geometry(n, r_inner, r_outer, 2048)
    fld = radial.solve_radial_geometry(geom, SolverParams())
    assert fld.converged

    bg_flat = cf.Background(cf.FLAT, n)
    bg_sphere = cf.Background(cf.SPHERE_CHART, n)
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = rng.normal(size=n)
        x *= rng.uniform(1.5 * r_inner, 0.6 * r_outer) / np.linalg.norm(x)
        jet_flat = jet2(fld, x)
        s_flat = cf.conformal_scalar(bg_flat, jet_flat, x)
        # grid jets carry O(h^2): the contract for solved fields
        assert s_flat == pytest.approx(-n * (n - 1), abs=2e-3)
        # transfer the flat solution to the sphere background: same metric,
        # same curvature, now measured through the sphere formulas
        u_flat_jet = cf.jet_power(jet_flat, -(n - 2) / 2.0)
        u_sphere_jet = sp.to_sphere_jet(tr, u_flat_jet, x)
        v_sphere_jet = cf.v_jet_from_u_jet(u_sphere_jet, n)
        s_sphere = cf.conformal_scalar(bg_sphere, v_sphere_jet, x)
        assert s_sphere == pytest.approx(s_flat, rel=1e-6)
