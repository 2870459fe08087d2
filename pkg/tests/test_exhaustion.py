"""Schedules, runs, normalized limits."""

import numpy as np
import pytest

from yamabe_lab import exhaustion as ex, oracles as oc
from yamabe_lab.domain import SolverParams
from yamabe_lab.errors import (DegenerateBasis, NonMonotoneSchedule,
                               OverlappingExclusions)
from yamabe_lab.fields import AxisymGeometry, sample_axisym_oracle

N = 4
E_AX = np.array([0.0, 0.0, 0.0, 1.0])


def test_geometric_law():
    sched = ex.build_schedule("radial", N, r0=0.5, q=0.5, i_max=4)
    assert sched.radii == (0.5, 0.25, 0.125, 0.0625, 0.03125)


def test_coupling_threshold():
    # n = 4 needs (n-2)(k-1)/2 > n+3, i.e. k > 8
    assert ex.coupling_threshold_ok(4, 9)
    assert not ex.coupling_threshold_ok(4, 8)
    sched = ex.build_schedule("two_ball", N, r0=0.5, q=0.5, i_max=2,
                              coupling_exponent=9.0,
                              centers=np.stack([np.zeros(N), E_AX]),
                              truncation=8.0)
    assert sched.threshold_ok
    flagged = ex.build_schedule("two_ball", N, r0=0.5, q=0.5, i_max=2,
                                coupling_exponent=8.0,
                                centers=np.stack([np.zeros(N), E_AX]),
                                truncation=8.0)
    assert not flagged.threshold_ok


def test_alternating_table_accepted():
    # alternating radius tables (two interleaved power laws) are explicit
    r, k = 0.5, 2.0
    radii = [r ** (k ** (2 * i)) for i in range(1, 4)]
    rhat = [r ** (k ** (2 * i - 1)) for i in range(1, 4)]
    sched = ex.build_schedule("two_ball", N, radii=radii, rhat=rhat,
                              centers=np.stack([np.zeros(N), E_AX]),
                              truncation=8.0)
    assert len(sched.radii) == 3


def test_schedule_validation():
    with pytest.raises(NonMonotoneSchedule):
        ex.build_schedule("radial", N, radii=[0.5, 0.5])
    with pytest.raises(NonMonotoneSchedule):
        ex.build_schedule("radial", N, r0=0.5, q=1.5, i_max=3)
    with pytest.raises(OverlappingExclusions):
        ex.build_schedule("two_ball", N, r0=0.6, q=0.5, i_max=1,
                          centers=np.stack([np.zeros(N), E_AX]),
                          truncation=8.0)


@pytest.fixture(scope="module")
def radial_run():
    sched = ex.build_schedule("radial", N, radii=[2.0 ** -i for i in range(1, 6)],
                              truncation=32.0)
    return ex.run_exhaustion(sched, SolverParams(grid_radial=2048))


def test_annulus_minimum_exact(radial_run):
    # m_i = u at |x| = 2 over the annulus [1, 2]: 2 r_i / (4 - r_i^2)
    for rec in radial_run.records:
        assert rec.m == pytest.approx(2.0 * rec.r / (4.0 - rec.r ** 2),
                                      abs=1e-9)
    assert radial_run.records[0].m == pytest.approx(4.0 / 15.0, abs=1e-12)


def test_monotone_in_index(radial_run):
    assert radial_run.monotonicity_violation <= 10 * SolverParams().tol


def test_single_index_schedule_equals_direct_solve():
    sched = ex.build_schedule("radial", N, radii=[0.5], truncation=32.0)
    run = ex.run_exhaustion(sched, SolverParams(grid_radial=1024))
    assert len(run.records) == 1
    rec = run.records[0]
    nodes = rec.field.geometry.nodes
    vex = (nodes ** 2 - 0.25) / 1.0
    assert np.max(np.abs(rec.field.v - vex)) <= 1e-8


def test_fit_pure_pole_limit(radial_run):
    basis = [oc.green_pole(N, np.zeros(N)), "const"]
    coef, resid, cond = ex.rescale_and_fit(radial_run, basis,
                                           d_min=1.0, d_max=2.0)
    assert cond < 1e3
    assert np.all(np.diff(resid) < 0)            # residual decreases
    assert abs(coef[-1, 1]) < 0.01 * coef[-1, 0]  # constant -> 0


def test_fit_exact_member_recovers_coefficients():
    # synthetic run whose fields are exactly m_i (2 G1 + 3 G2)
    z = np.linspace(-2.0, 3.0, 161)
    p = np.linspace(0.0, 2.5, 81)
    geom = AxisymGeometry(n=N, z_nodes=z, p_nodes=p,
                          circles=((0.0, 0.02), (1.0, 0.02)))
    spec = oc.multipole(N, np.stack([np.zeros(N), E_AX]), [2.0, 3.0])
    sched = ex.build_schedule("two_ball", N, radii=[0.02, 0.01],
                              centers=np.stack([np.zeros(N), E_AX]),
                              truncation=8.0)
    records = []
    for i, m_i in enumerate((0.5, 0.25)):
        fld = sample_axisym_oracle(geom, spec, oc.oracle_v)
        fld.v = fld.v * m_i ** (-2.0 / (N - 2.0))  # scales u by m_i
        rec = ex.IndexRecord(i=i, r=sched.radii[i], rhat=sched.rhat[i],
                             field=fld, m=m_i)
        records.append(rec)
    run = ex.ExhaustionRun(schedule=sched, records=records)
    basis = [oc.green_pole(N, np.zeros(N)), oc.green_pole(N, E_AX)]
    coef, resid, cond = ex.rescale_and_fit(run, basis)
    assert np.allclose(coef, [[2.0, 3.0], [2.0, 3.0]], atol=1e-10)
    assert np.max(resid) <= 1e-10


def test_degenerate_basis_raises(radial_run):
    basis = [oc.green_pole(N, np.zeros(N)), oc.green_pole(N, np.zeros(N))]
    with pytest.raises(DegenerateBasis):
        ex.rescale_and_fit(radial_run, basis, d_min=1.0, d_max=2.0)


@pytest.fixture(scope="module")
def tube_run():
    sched = ex.build_schedule("tube", N, r0=1.0, q=0.5, i_max=4, tube_k=2,
                              truncation=64.0)
    return ex.run_exhaustion(sched, SolverParams(grid_radial=1536))


def test_tube_self_similarity(tube_run):
    assert ex.self_similarity_violation(tube_run) <= 10 * SolverParams().tol


def test_tube_monotone(tube_run):
    assert tube_run.monotonicity_violation <= 10 * SolverParams().tol


def test_normalization_slope(radial_run):
    # m_i ~ 2 r_i / 4 for small r: log-log slope (n-2)/2 = 1
    slope = ex.normalization_slope(radial_run)
    assert slope == pytest.approx(1.0, abs=0.1)
