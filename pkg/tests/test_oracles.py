"""Closed forms: exact spot values, equation residuals, jets."""

import numpy as np
import pytest
from scipy.stats import qmc

from yamabe_lab import oracles as oc
from yamabe_lab.errors import OutsideDomain


def e(n, k, val=1.0):
    x = np.zeros(n)
    x[k] = val
    return x


def test_exterior_ball_spot_values():
    spec = oc.exterior_ball(4, np.zeros(4), 1.0)
    x = e(4, 0, 2.0)
    assert oc.oracle_u(spec, x) == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert oc.oracle_v(spec, x) == pytest.approx(1.5, abs=1e-15)


def test_poincare_center_value():
    spec = oc.poincare_ball(3, 1.0)
    assert oc.oracle_u(spec, np.zeros(3)) == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_tube_spot_value():
    spec = oc.tube_complement(4, 2)
    x = np.array([0.7, -0.3, 1.0, 0.0])  # |x''| = 1
    assert oc.oracle_u(spec, x) == pytest.approx(2.0 ** -0.5, abs=1e-15)


def test_half_space_v_is_height():
    spec = oc.half_space(5)
    x = np.array([1.0, 2.0, 3.0, 4.0, 0.25])
    assert oc.oracle_v(spec, x) == pytest.approx(0.25, abs=1e-16)


def test_boundary_blowup_monotone():
    spec = oc.exterior_ball(4, np.zeros(4), 1.0)
    vals = [oc.oracle_u(spec, e(4, 0, 1.0 + d)) for d in (0.5, 0.1, 0.01, 1e-4)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def _sample_points(spec, count, seed=0):
    """Quasi-random points inside the oracle's natural domain."""
    n = spec.n
    halton = qmc.Halton(d=n, seed=seed)
    raw = halton.random(16 * count)
    pts = []
    for row in raw:
        x = 6.0 * row - 3.0
        if spec.kind == oc.EXTERIOR_BALL:
            x = spec.center + x
            if np.linalg.norm(x - spec.center) <= spec.radius * 1.1:
                continue
        elif spec.kind == oc.POINCARE_BALL:
            x = 0.3 * x
            if np.linalg.norm(x) >= spec.radius * 0.95:
                continue
        elif spec.kind == oc.HALF_SPACE:
            x[-1] = abs(x[-1]) + 0.2
        elif spec.kind == oc.TUBE_COMPLEMENT:
            if np.linalg.norm(x[spec.tube_k:]) < 0.2:
                continue
        elif spec.kind == oc.TWO_BALL_SUPER:
            d = np.linalg.norm(spec.centers - x, axis=1)
            if d[0] <= spec.radii[0] + 0.1 or d[1] <= spec.radii[1] + 0.1:
                continue
        else:
            if np.any(np.linalg.norm(spec.poles - x, axis=1) < 0.2):
                continue
        pts.append(x)
        if len(pts) == count:
            break
    assert len(pts) == count
    return pts


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("kind", ["exterior_ball", "poincare_ball",
                                  "half_space", "tube_complement",
                                  "green_pole", "multipole"])
def test_residual_vanishes(n, kind):
    if kind == "exterior_ball":
        spec = oc.exterior_ball(n, np.zeros(n), 1.0)
    elif kind == "poincare_ball":
        spec = oc.poincare_ball(n, 1.0)
    elif kind == "half_space":
        spec = oc.half_space(n)
    elif kind == "tube_complement":
        spec = oc.tube_complement(n, n - 2)
    elif kind == "green_pole":
        spec = oc.green_pole(n, np.zeros(n), 2.0)
    else:
        spec = oc.multipole(n, np.stack([np.zeros(n), e(n, 0, 1.5)]),
                            [1.0, 0.5])
    for x in _sample_points(spec, 250):
        assert abs(oc.oracle_residual(spec, x)) <= 1e-9


def test_two_ball_super_is_supersolution():
    spec = oc.two_ball_super(4, np.zeros(4), 0.1, e(4, 0, 1.0), 0.1)
    for x in _sample_points(spec, 200):
        assert oc.oracle_residual(spec, x) <= 1e-12


def test_outside_domain_raises():
    spec = oc.exterior_ball(4, np.zeros(4), 1.0)
    with pytest.raises(OutsideDomain):
        oc.oracle_u(spec, e(4, 0, 0.5))
    with pytest.raises(OutsideDomain):
        oc.oracle_v(oc.half_space(3), np.array([0.0, 0.0, -1.0]))
    with pytest.raises(OutsideDomain):
        oc.oracle_u(oc.poincare_ball(3), np.array([1.0, 0.0, 0.0]))


def test_tube_k_window():
    with pytest.raises(ValueError):
        oc.tube_complement(4, 1)   # needs 1 < k <= 2
    with pytest.raises(ValueError):
        oc.tube_complement(4, 3)
    oc.tube_complement(6, 3)


def test_multipole_requires_positive_coefficients():
    with pytest.raises(ValueError):
        oc.multipole(4, np.zeros((1, 4)), [-1.0])


def test_jets_match_finite_differences():
    rng = np.random.default_rng(3)
    specs = [oc.exterior_ball(4, rng.normal(size=4) * 0.1, 0.7),
             oc.poincare_ball(5, 2.0),
             oc.tube_complement(5, 3),
             oc.multipole(4, np.stack([np.zeros(4), e(4, 1, 2.0)]), [1.0, 2.0]),
             oc.two_ball_super(4, np.zeros(4), 0.2, e(4, 0, 1.5), 0.3)]
    h = 1e-5
    for spec in specs:
        x = _sample_points(spec, 1, seed=11)[0]
        jet = oc.oracle_u_jet(spec, x)
        n = spec.n
        for i in range(n):
            num = (oc.oracle_u(spec, x + h * np.eye(n)[i])
                   - oc.oracle_u(spec, x - h * np.eye(n)[i])) / (2 * h)
            assert num == pytest.approx(jet.gradient[i], rel=1e-6, abs=1e-8)
        num_lap = sum(
            (oc.oracle_u(spec, x + h * np.eye(n)[i])
             - 2 * oc.oracle_u(spec, x)
             + oc.oracle_u(spec, x - h * np.eye(n)[i])) / h ** 2
            for i in range(n))
        assert num_lap == pytest.approx(np.trace(jet.hessian),
                                        rel=1e-5, abs=1e-5)


def test_u_v_consistency():
    spec = oc.two_ball_super(5, np.zeros(5), 0.3, e(5, 2, 2.0), 0.4)
    for x in _sample_points(spec, 50):
        u = oc.oracle_u(spec, x)
        v = oc.oracle_v(spec, x)
        assert v == pytest.approx(u ** (-2.0 / 3.0), rel=1e-14)


def test_poincare_boundary_limit():
    # v -> 0 at the rim with |grad v| -> 1
    spec = oc.poincare_ball(4, 1.0)
    for eps in (1e-2, 1e-4, 1e-6):
        x = e(4, 0, 1.0 - eps)
        v = oc.oracle_v(spec, x)
        jet = oc.oracle_v_jet(spec, x)
        assert v == pytest.approx(eps - eps ** 2 / 2.0, rel=1e-12)
        assert np.linalg.norm(jet.gradient) == pytest.approx(1.0, abs=2 * eps)


def test_tube_metric_curvature_uniform_over_three_decades():
    # the tube closed form is scale self-similar, so the extremal Ricci
    # eigenvalue of its metric is one constant along the whole tube;
    # record the bound rather than asserting a literature value
    from yamabe_lab import conformal as cf
    spec = oc.tube_complement(4, 2)
    bg = cf.Background(cf.FLAT, 4)
    vals = []
    for s in np.geomspace(1.0, 1e3, 31):
        x = np.array([0.4, -1.1, s, 0.0])
        rep = cf.conformal_ricci(bg, oc.oracle_v_jet(spec, x))
        vals.append(rep.extremal_abs)
    vals = np.asarray(vals)
    assert np.all(np.isfinite(vals))
    assert np.max(vals) - np.min(vals) <= 1e-9 * np.max(vals)
    assert np.max(vals) < 10.0
