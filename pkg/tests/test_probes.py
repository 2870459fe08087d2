"""Probe constructions and blow-up classification."""

import numpy as np
import pytest

from yamabe_lab import exhaustion as ex, oracles as oc, probes, radial
from yamabe_lab.conformal import Background, FLAT
from yamabe_lab.domain import BallExclusion, DomainSpec, SolverParams
from yamabe_lab.errors import PathOutsideDomain, RadiusTooSmall

N = 4
BG = Background(FLAT, N)
PARAMS = SolverParams(grid_radial=1024)


@pytest.fixture(scope="module")
def exterior_field():
    dom = DomainSpec(BG, (BallExclusion(np.zeros(N), 1.0),), 32.0)
    return radial.solve_radial(dom, PARAMS)


@pytest.fixture(scope="module")
def poincare_field():
    dom = DomainSpec(Background(FLAT, 3), (), 1.0, shell_is_boundary=True)
    return radial.solve_radial(dom, PARAMS)


def test_segment_on_exterior_ball(exterior_field):
    pr = probes.segment_probe(exterior_field, np.zeros(N), np.eye(N)[0], 3.0)
    assert pr.t_entry == pytest.approx(1.0, abs=1e-9)
    # v is convex along the ray: the derivative peaks at the far endpoint
    assert pr.t_peak == pytest.approx(3.0, rel=1e-3)
    assert not pr.pinch
    assert pr.ricci_nn == pytest.approx(-(N - 1), abs=1e-6)


def test_segment_on_poincare(poincare_field):
    pr = probes.segment_probe(poincare_field, np.array([1.0, 0, 0]),
                              np.array([-1.0, 0, 0]), 0.9)
    # derivative decreasing from the boundary value 1: peak at entry
    assert pr.t_peak <= pr.t_entry + 1e-9
    assert not pr.pinch
    assert pr.ricci_nn == pytest.approx(-2.0, abs=1e-6)
    assert pr.deriv_at_peak <= 1.0 + 1e-6


def test_segment_mean_value_bound(exterior_field):
    pr = probes.segment_probe(exterior_field, np.zeros(N), np.eye(N)[1], 2.5)
    length = pr.t_end - pr.t_entry
    secant = (pr.samples["v"][-1] - pr.samples["v"][0]) / length
    assert pr.deriv_at_peak >= secant - 1e-12


def test_segment_path_outside(exterior_field):
    with pytest.raises(PathOutsideDomain):
        probes.segment_probe(exterior_field, np.zeros(N), np.eye(N)[0], 0.5)


def test_pinch_monotone_in_epsilon(exterior_field):
    x = np.concatenate([[1.2], np.zeros(N - 1)])
    nu = np.eye(N)[1]
    eps = np.linspace(0.01, 2.0, 25)
    flags = [probes.pinch_condition(exterior_field, x, nu, e)[0] for e in eps]
    # once true, stays true for larger eps
    assert flags == sorted(flags)


def test_arc_requires_large_radius(exterior_field):
    x0 = np.concatenate([[2.0], np.zeros(N - 1)])
    x1 = np.concatenate([[3.0], np.zeros(N - 1)])
    with pytest.raises(RadiusTooSmall):
        probes.arc_probe(exterior_field, x0, x1, 2.0)


def test_arc_straight_line_limit(exterior_field):
    x0 = np.concatenate([[1.5], np.zeros(N - 1)])
    x1 = np.concatenate([[2.5], np.zeros(N - 1)])
    seg = probes.segment_probe(exterior_field, x0, (x1 - x0), 1.0)
    prev = None
    for R in (8.0, 32.0, 128.0):
        arc = probes.arc_probe(exterior_field, x0, x1, R)
        diff = abs(arc.deriv_at_peak - seg.deriv_at_peak)
        if prev is not None:
            assert diff <= prev * 0.5 + 1e-12   # O(1/R) approach
        prev = diff
    assert arc.ricci_nn == pytest.approx(-(N - 1), abs=1e-5)


def test_arc_on_poincare(poincare_field):
    arc = probes.arc_probe(poincare_field, np.array([0.9, 0, 0]),
                           np.array([-0.9, 0, 0]), 8.0)
    assert not arc.pinch
    assert arc.ricci_nn == pytest.approx(-2.0, abs=1e-4)
    assert np.isfinite(arc.transverse_term)


@pytest.fixture(scope="module")
def coupled_run():
    e2 = np.zeros(N)
    e2[-1] = 2.0
    sched = ex.build_schedule("two_ball", N, r0=0.8, q=0.9, i_max=6,
                              coupling_exponent=9.0,
                              centers=np.stack([np.zeros(N), e2]),
                              truncation=8.0)
    stats = ex.StatsConfig(anchor=tuple(e2), delta=1.0, near_point=tuple(e2),
                           near_radius=0.25, far_radius=0.5)
    return ex.run_exhaustion(sched, SolverParams(grid_axisym=(128, 64)),
                             stats=stats)


def test_classify_blowup_asymmetry(coupled_run):
    e2 = np.zeros(N)
    e2[-1] = 2.0
    v2 = probes.classify(coupled_run, e2, rho=0.25)
    assert v2.classification == probes.BLOWUP
    v1 = probes.classify(coupled_run, np.zeros(N), rho=1.0)
    assert v1.classification == probes.BOUNDED
    gen = np.zeros(N)
    gen[0] = 1.5
    assert probes.classify(coupled_run, gen, rho=0.25).classification \
        == probes.BOUNDED


def test_classify_deterministic(coupled_run):
    e2 = np.zeros(N)
    e2[-1] = 2.0
    a = probes.classify(coupled_run, e2, rho=0.25)
    b = probes.classify(coupled_run, e2, rho=0.25)
    assert a.classification == b.classification
    assert np.array_equal(a.sups, b.sups)


def test_two_ball_pinch_probe(coupled_run):
    # ray toward the fast-shrinking ball: pinch appears at late indices and
    # the frame Ricci component is large negative, growing across indices
    e2 = np.zeros(N)
    e2[-1] = 2.0
    down = np.zeros(N)
    down[-1] = -1.0
    rnn = []
    for rec in coupled_run.records[-3:]:
        pr = probes.segment_probe(rec.field, e2, down, 0.6)
        rnn.append(pr.ricci_nn)
        assert pr.pinch
    assert all(r < 0 for r in rnn)
    assert abs(rnn[-1]) > abs(rnn[0])


def test_classify_bounded_on_exterior_run():
    sched = ex.build_schedule("radial", N, radii=[2.0 ** -i for i in range(4)],
                              truncation=16.0)
    run = ex.run_exhaustion(sched, SolverParams(grid_radial=1024))
    pt = np.concatenate([[1.0], np.zeros(N - 1)])
    v = probes.classify(run, pt, rho=0.5)
    assert v.classification == probes.BOUNDED
    assert np.max(np.abs(v.sups - (N - 1))) <= 1e-5


def test_arc_transverse_decomposition_at_pinch(coupled_run):
    # arc skirting the fast-shrinking ball: at an interior derivative peak
    # the path second derivative (nearly) vanishes and the directional
    # second derivative decomposes into it plus the transverse curvature
    # term; the frame Ricci component is large negative
    from yamabe_lab.fields import jet2

    e2 = np.zeros(N)
    e2[-1] = 2.0
    ax = np.zeros(N)
    ax[-1] = 1.0
    x0 = e2 - 0.4 * ax
    x1 = e2 + 0.4 * ax
    rec = coupled_run.records[-1]
    arc = probes.arc_probe(rec.field, x0, x1, 4.0)
    assert arc.pinch
    assert np.isfinite(arc.transverse_term)
    assert arc.ricci_nn < -100.0
    # reconstruct the identity d_nn v = d_tt(v o sigma) - f'' d_1 v at the
    # peak from independent grid jets
    eps = 0.4
    t = arc.t_peak
    e1 = np.zeros(N)
    e1[0] = 1.0
    f = np.sqrt(16.0 - (t - eps) ** 2) - np.sqrt(16.0 - eps ** 2)
    fp = -(t - eps) / np.sqrt(16.0 - (t - eps) ** 2)
    pt = x0 + t * ax + f * e1
    jet = jet2(rec.field, pt)
    nu = ax + fp * e1
    vnn_along = float(nu @ jet.hessian @ nu)
    # local sampling noise of the path second derivative
    d2 = arc.samples["d2v"]
    k = int(np.argmax(arc.samples["dv"]))
    noise = np.max(np.abs(np.diff(d2[max(0, k - 3):k + 4])))
    resid = abs(vnn_along - (arc.second_deriv_at_peak + arc.transverse_term))
    assert resid <= 2.0 * noise + 1e-6


def test_coupled_difference_below_second_barrier(coupled_run):
    # w = u - u1 <= u2 nodewise, equivalently v >= (u1+u2)-barrier, for the
    # power-coupled schedule (desk-scale tolerance in the regular variable)
    rec = coupled_run.records[2]
    fld = rec.field
    geom = fld.geometry
    Z, P = geom.z_nodes, geom.p_nodes
    r1, r2 = rec.r, rec.rhat
    s1 = np.sqrt(Z[:, None] ** 2 + P[None, :] ** 2)
    s2 = np.sqrt((Z[:, None] - 2.0) ** 2 + P[None, :] ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        usum = np.where(s1 > r1, 2 * r1 / (s1 ** 2 - r1 ** 2), np.inf) \
            + np.where(s2 > r2, 2 * r2 / (s2 ** 2 - r2 ** 2), np.inf)
        v_super = usum ** -1.0
    ok = np.isfinite(fld.v) & (fld.v > 0) & np.isfinite(v_super)
    assert np.nanmax((v_super - fld.v)[ok]) <= 1e-6


def test_arc_ricci_grows_across_indices(coupled_run):
    # arc from the slow-ball side toward the fast ball: the pinched frame
    # component grows in magnitude across the exhaustion
    e2 = np.zeros(N)
    e2[-1] = 2.0
    ax = np.zeros(N)
    ax[-1] = 1.0
    vals = []
    for rec in (coupled_run.records[-3], coupled_run.records[-1]):
        arc = probes.arc_probe(rec.field, e2 - 0.4 * ax, e2 + 0.4 * ax, 4.0)
        assert arc.ricci_nn < 0
        vals.append(abs(arc.ricci_nn))
    assert vals[1] > vals[0]


def test_pinch_flag_implies_small_second_derivative(coupled_run):
    e2 = np.zeros(N)
    e2[-1] = 2.0
    down = np.zeros(N)
    down[-1] = -1.0
    pr = probes.segment_probe(coupled_run.records[-1].field, e2, down, 0.6)
    assert pr.pinch
    d2 = pr.samples["d2v"]
    path_tol = np.max(np.abs(np.diff(d2)))
    assert abs(pr.second_deriv_at_peak) <= path_tol


@pytest.fixture(scope="module")
def equal_run():
    e = np.zeros(N)
    e[-1] = 1.0
    sched = ex.build_schedule("two_ball", N, r0=0.2, q=0.5, i_max=4,
                              centers=np.stack([np.zeros(N), e]),
                              truncation=8.0)
    return ex.run_exhaustion(sched, SolverParams(grid_axisym=(128, 64)))


def test_classify_blowup_everywhere_for_equal_radii(equal_run):
    # equal radii: the normalized limit is a two-pole harmonic whose metric
    # has nowhere-vanishing Ricci, so every off-pole ball blows up; the
    # threshold is taken relative to the probe ball itself
    pt = np.array([0.6, 0.0, 0.0, 0.5])
    base = probes.classify(equal_run, pt, rho=0.3, threshold=np.inf)
    T = 10.0 * base.sups[0]
    v = probes.classify(equal_run, pt, rho=0.3, threshold=T)
    assert v.classification == probes.BLOWUP
    assert v.sups[-1] > T
