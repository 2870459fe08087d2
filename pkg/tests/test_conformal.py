"""Curvature transformation law: hyperbolic normalizations, flatness
characterization, frame invariance."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yamabe_lab import conformal as cf
from yamabe_lab import oracles as oc
from yamabe_lab.errors import NonpositiveConformalFactor


def _a_point(n, scale=2.0, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=n) * scale


@pytest.mark.parametrize("n", [3, 4, 5])
def test_hyperbolic_oracles(n):
    bg = cf.Background(cf.FLAT, n)
    specs = [oc.exterior_ball(n, np.zeros(n), 1.0),
             oc.poincare_ball(n, 1.0),
             oc.half_space(n)]
    pts = [np.concatenate([[2.0], np.zeros(n - 1)]),
           np.concatenate([[0.4], np.zeros(n - 1)]),
           np.concatenate([np.zeros(n - 1), [0.7]])]
    for spec, x in zip(specs, pts):
        rep = cf.conformal_ricci(bg, oc.oracle_v_jet(spec, x))
        assert np.max(np.abs(rep.components + (n - 1) * np.eye(n))) <= 1e-9
        assert rep.extremal_abs == pytest.approx(n - 1, abs=1e-9)
        assert cf.conformal_scalar(bg, oc.oracle_v_jet(spec, x)) == \
            pytest.approx(-n * (n - 1), abs=1e-9)


def test_constant_v_is_flat():
    bg = cf.Background(cf.FLAT, 4)
    jet = cf.Jet2(2.5, np.zeros(4), np.zeros((4, 4)))
    rep = cf.conformal_ricci(bg, jet)
    assert np.max(np.abs(rep.components)) == 0.0
    assert cf.conformal_scalar(bg, jet) == 0.0


def test_half_space_n3_explicit():
    bg = cf.Background(cf.FLAT, 3)
    x = np.array([0.3, -0.1, 0.8])
    jet = oc.oracle_v_jet(oc.half_space(3), x)
    rep = cf.conformal_ricci(bg, jet)
    assert np.allclose(rep.components, -2.0 * np.eye(3), atol=1e-14)


def test_green_pole_metric_is_flat():
    bg = cf.Background(cf.FLAT, 4)
    spec = oc.green_pole(4, np.array([0.2, 0.0, -1.0, 0.5]), 3.0)
    rng = np.random.default_rng(5)
    for _ in range(25):
        x = rng.normal(size=4) * 2.0
        if np.linalg.norm(x - spec.poles[0]) < 0.3:
            continue
        rep = cf.conformal_ricci(bg, oc.oracle_v_jet(spec, x))
        assert rep.extremal_abs <= 1e-9


def test_two_pole_metric_is_nowhere_flat():
    bg = cf.Background(cf.FLAT, 4)
    p2 = np.array([1.0, 0.0, 0.0, 0.0])
    spec = oc.multipole(4, np.stack([np.zeros(4), p2]), [1.0, 1.0])
    rng = np.random.default_rng(6)
    count = 0
    while count < 100:
        x = rng.normal(size=4) * 1.5
        if min(np.linalg.norm(x), np.linalg.norm(x - p2)) < 0.2:
            continue
        rep = cf.conformal_ricci(bg, oc.oracle_v_jet(spec, x))
        assert rep.extremal_abs > 1e-6
        count += 1


def test_trace_identity_on_solutions():
    # any jet consistent with the curvature equation gives scalar -n(n-1)
    bg = cf.Background(cf.FLAT, 5)
    spec = oc.exterior_ball(5, np.zeros(5), 0.7)
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.normal(size=5)
        if np.linalg.norm(x) < 1.0:
            continue
        s = cf.conformal_scalar(bg, oc.oracle_v_jet(spec, x))
        assert s == pytest.approx(-20.0, abs=1e-9)


def test_rotation_invariance():
    bg = cf.Background(cf.FLAT, 4)
    spec = oc.multipole(4, np.stack([np.zeros(4),
                                     np.array([1.0, 0, 0, 0])]), [2.0, 1.0])
    x = np.array([0.4, 0.6, -0.2, 0.3])
    jet = oc.oracle_v_jet(spec, x)
    base = cf.conformal_ricci(bg, jet)
    rng = np.random.default_rng(8)
    for _ in range(10):
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        rotated = cf.Jet2(jet.value, q @ jet.gradient,
                          q @ jet.hessian @ q.T)
        rep = cf.conformal_ricci(bg, rotated)
        assert rep.extremal_abs == pytest.approx(base.extremal_abs,
                                                 rel=1e-12, abs=1e-12)
        assert rep.trace == pytest.approx(base.trace, rel=1e-12, abs=1e-12)


def test_nonpositive_factor_raises():
    bg = cf.Background(cf.FLAT, 3)
    jet = cf.Jet2(-0.1, np.zeros(3), np.zeros((3, 3)))
    with pytest.raises(NonpositiveConformalFactor):
        cf.conformal_ricci(bg, jet)
    with pytest.raises(NonpositiveConformalFactor):
        cf.conformal_scalar(bg, cf.Jet2(0.0, np.zeros(3), np.zeros((3, 3))))


def test_background_validation():
    with pytest.raises(ValueError):
        cf.Background(cf.FLAT, 2)
    with pytest.raises(ValueError):
        cf.Background("hyperbolic", 4)
    assert cf.Background(cf.SPHERE_CHART, 4).scalar_curvature == 12.0


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=3, max_value=5), st.integers(min_value=0, max_value=10 ** 6))
def test_extremal_dominates_trace(n, seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n, n))
    jet = cf.Jet2(float(rng.uniform(0.1, 3.0)), rng.normal(size=n),
                  0.5 * (h + h.T))
    rep = cf.conformal_ricci(cf.Background(cf.FLAT, n), jet)
    assert rep.extremal_abs >= abs(rep.trace) / n - 1e-12


def test_jet_power_chain_rule():
    rng = np.random.default_rng(9)
    h = rng.normal(size=(4, 4))
    jet = cf.Jet2(1.7, rng.normal(size=4), 0.5 * (h + h.T))
    vj = cf.v_jet_from_u_jet(jet, 4)
    assert vj.value == pytest.approx(1.7 ** -1.0)
    # numeric check of the gradient through a 1-d slice
    a = -2.0 / 2.0
    g_expected = a * 1.7 ** (a - 1) * jet.gradient
    assert np.allclose(vj.gradient, g_expected)
