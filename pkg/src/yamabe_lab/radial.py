"""Damped-Newton solver for the 1-D (radial / tube / slab) reductions.

The solve runs in v (the reciprocal-power companion of the conformal
factor): v vanishes linearly at excised boundaries, so the Dirichlet
condition v = 0 is regular there, while u itself blows up.  The reduced
equation on the radius coordinate is

    v (v'' + m/rho v') + S v^2 / (2(n-1)) = (n/2) (v'^2 - 1) + f

with m = n-1 (balls), n-k-1 (tubes), 0 (slabs), S the background scalar
curvature (0 for every flat solve here), and f an optional manufactured
source used by the verification sweeps.  Newton's linearization

    F'(v)[phi] = v lap phi + phi lap v + S v phi/(n-1) - n v' phi'

gives a tridiagonal system solved by direct banded factorization, with
residual backtracking (halving, bounded) because plain Newton overshoots
where v degenerates to zero.
"""

import numpy as np
from scipy.linalg import solve_banded

from . import grids, oracles
from .domain import BallExclusion, TubeExclusion, SolverParams, check_tube_k
from .errors import (BracketOrderViolation, BracketViolation, NewtonDiverged,
                     NonConvergence)
from .fields import (ANNULUS, BALL_EXTERIOR, BALL_INTERIOR, SLAB, TUBE,
                     RadialGeometry, SampledField)


def radial_residual(nodes, v, m_exp, n, s_curv=0.0, source=None, axis_lo=False,
                    with_scale=False):
    """Residual of the reduced equation at every node (NaN at Dirichlet
    endpoints, symmetric limit at an axis node).

    with_scale additionally returns the per-node backward-error magnitude
    (sum of absolute stencil contributions).  Convergence targets are
    measured against max(1, scale): where v grows like r^2 toward a far
    truncation, the raw terms reach v^2/h^2 ~ 1e9 and float64 cannot
    represent an absolute residual below their rounding floor.
    """
    f = np.full(len(nodes), np.nan)
    scale = np.full(len(nodes), np.nan)
    hm = nodes[1:-1] - nodes[:-2]
    hp = nodes[2:] - nodes[1:-1]
    vm, vc, vp = v[:-2], v[1:-1], v[2:]
    c2m = 2.0 / (hm * (hm + hp))
    c20 = -2.0 / (hm * hp)
    c2p = 2.0 / (hp * (hm + hp))
    c1m = -hp / (hm * (hm + hp))
    c10 = (hp - hm) / (hm * hp)
    c1p = hm / (hp * (hm + hp))
    d1 = c1m * vm + c10 * vc + c1p * vp
    d2 = c2m * vm + c20 * vc + c2p * vp
    r = nodes[1:-1]
    mr = m_exp / r if m_exp else 0.0
    lap = d2 + mr * d1 if m_exp else d2
    src = source(nodes)[1:-1] if source is not None else np.zeros_like(r)
    f[1:-1] = (vc * lap + s_curv * vc * vc / (2.0 * (n - 1.0))
               - 0.5 * n * (d1 * d1 - 1.0) - src)
    if with_scale:
        t2abs = np.abs(c2m * vm) + np.abs(c20 * vc) + np.abs(c2p * vp)
        t1abs = np.abs(c1m * vm) + np.abs(c10 * vc) + np.abs(c1p * vp)
        scale[1:-1] = (np.abs(vc) * (t2abs + (mr if m_exp else 0.0) * t1abs)
                       + abs(s_curv) * vc * vc / (2.0 * (n - 1.0))
                       + 0.5 * n * (t1abs * t1abs + 1.0) + np.abs(src))
    if axis_lo:
        h1 = nodes[1] - nodes[0]
        lap0 = (m_exp + 1.0) * 2.0 * (v[1] - v[0]) / h1 ** 2
        src0 = source(nodes[:1])[0] if source is not None else 0.0
        f[0] = (v[0] * lap0 + s_curv * v[0] ** 2 / (2.0 * (n - 1.0))
                + 0.5 * n - src0)
        if with_scale:
            scale[0] = (abs(v[0]) * (m_exp + 1.0) * 2.0
                        * (abs(v[1]) + abs(v[0])) / h1 ** 2
                        + abs(s_curv) * v[0] ** 2 / (2.0 * (n - 1.0))
                        + 0.5 * n + abs(src0))
    if with_scale:
        return f, scale
    return f


def _newton(nodes, v, m_exp, n, params, s_curv=0.0, source=None,
            axis_lo=False):
    """Damped Newton on the interior unknowns of v (Dirichlet ends fixed).

    Returns (v, iterations, residual_sup).  Raises NewtonDiverged when the
    residual cannot be reduced within the damping budget.
    """
    lo = 0 if axis_lo else 1
    hi = len(nodes) - 1  # exclusive upper unknown bound

    def scaled_residual(vv):
        f, scale = radial_residual(nodes, vv, m_exp, n, s_curv, source,
                                   axis_lo, with_scale=True)
        return f, float(np.max(np.abs(f[lo:hi])
                               / np.maximum(1.0, scale[lo:hi])))

    f, res = scaled_residual(v)
    iters = 0
    while res > params.tol and iters < params.max_newton:
        hm = nodes[1:-1] - nodes[:-2]
        hp = nodes[2:] - nodes[1:-1]
        c2m = 2.0 / (hm * (hm + hp))
        c20 = -2.0 / (hm * hp)
        c2p = 2.0 / (hp * (hm + hp))
        c1m = -hp / (hm * (hm + hp))
        c10 = (hp - hm) / (hm * hp)
        c1p = hm / (hp * (hm + hp))
        vm, vc, vp = v[:-2], v[1:-1], v[2:]
        d1 = c1m * vm + c10 * vc + c1p * vp
        d2 = c2m * vm + c20 * vc + c2p * vp
        r = nodes[1:-1]
        mr = m_exp / r if m_exp else np.zeros_like(r)
        lap = d2 + mr * d1

        diag = np.zeros(len(nodes))
        lowd = np.zeros(len(nodes))
        upd = np.zeros(len(nodes))
        diag[1:-1] = (vc * (c20 + mr * c10) + lap
                      + s_curv * vc / (n - 1.0) - n * d1 * c10)
        lowd[1:-1] = vc * (c2m + mr * c1m) - n * d1 * c1m
        upd[1:-1] = vc * (c2p + mr * c1p) - n * d1 * c1p
        if axis_lo:
            h1 = nodes[1] - nodes[0]
            a = (m_exp + 1.0) * 2.0 / h1 ** 2
            diag[0] = -v[0] * a + a * (v[1] - v[0]) + s_curv * v[0] / (n - 1.0)
            upd[0] = v[0] * a

        m = hi - lo
        ab = np.zeros((3, m))
        ab[0, 1:] = upd[lo:hi - 1]
        ab[1, :] = diag[lo:hi]
        ab[2, :-1] = lowd[lo + 1:hi]
        delta = solve_banded((1, 1), ab, -f[lo:hi])

        step = 1.0
        improved = False
        for _ in range(params.max_halvings + 1):
            trial = v.copy()
            trial[lo:hi] += step * delta
            if np.any(trial[lo:hi] <= 0.0):
                step *= 0.5
                continue
            ft, rt = scaled_residual(trial)
            if rt < res or rt <= params.tol:
                v, f, res = trial, ft, rt
                improved = True
                break
            step *= 0.5
        if not improved:
            raise NewtonDiverged(
                f"residual stalled at {res:.3e} after {iters} iterations")
        iters += 1
    if res > params.tol:
        raise NewtonDiverged(
            f"residual {res:.3e} above tol {params.tol:.1e} "
            f"after {iters} iterations")
    return v, iters, res


# ---------------------------------------------------------------------------
# geometry / data assembly
# ---------------------------------------------------------------------------

def build_radial_geometry(dom, params, required_nodes=(), num_cells=None,
                          truncation_data="asymptote", nodes=None):
    """Mesh + boundary data for a radial DomainSpec.

    truncation_data: "asymptote" samples the matching closed form at the
    cut ("exterior-ball" / tube asymptote), "distance" uses the distance
    supersolution bound, or pass a number for explicit v data.
    """
    n = dom.n
    cells = int(num_cells or params.grid_radial)
    ratio, stretch = params.grading_ratio, params.grading_stretch
    excl = dom.exclusions[0] if dom.exclusions else None

    if isinstance(excl, BallExclusion):
        r_in, r_out = excl.radius, float(dom.truncation_radius)
        if nodes is None:
            nodes = grids.graded_nodes(r_in, r_out, cells, grade_lo=True,
                                       ratio=ratio, stretch=stretch)
        spec = oracles.exterior_ball(n, np.zeros(n), r_in)
        geom_kind, m_exp, lo_exc, hi_exc = BALL_EXTERIOR, n - 1, True, False
        if dom.shell_is_boundary:
            hi_exc = True
            geom_kind = ANNULUS
        if truncation_data == "asymptote":
            hi_val = oracles.oracle_v(spec, _point_at(n, r_out))
        elif truncation_data == "distance":
            hi_val = r_out - r_in
        else:
            hi_val = float(truncation_data)
        tube_k = 0
    elif isinstance(excl, TubeExclusion):
        check_tube_k(n, excl.k)
        r_in, r_out = excl.radius, float(dom.truncation_radius)
        if nodes is None:
            nodes = grids.log_nodes(r_in, r_out, cells)
        spec = oracles.tube_complement(n, excl.k)
        geom_kind, m_exp, lo_exc, hi_exc = TUBE, n - excl.k - 1, True, False
        if truncation_data == "asymptote":
            xh = np.zeros(n)
            xh[excl.k] = r_out
            hi_val = oracles.oracle_v(spec, xh)
        elif truncation_data == "distance":
            hi_val = r_out - r_in
        else:
            hi_val = float(truncation_data)
        tube_k = excl.k
    else:
        # no exclusion: the shell itself is the boundary (interior ball)
        r_in, r_out = 0.0, float(dom.truncation_radius)
        if nodes is None:
            nodes = grids.graded_nodes(0.0, r_out, cells, grade_hi=True,
                                       ratio=ratio, stretch=stretch)
        geom_kind, m_exp, lo_exc, hi_exc = BALL_INTERIOR, n - 1, False, True
        hi_val = 0.0
        tube_k = 0

    if required_nodes:
        nodes = grids.snap_nodes(nodes, required_nodes)
    return RadialGeometry(kind=geom_kind, n=n, nodes=nodes, m_exp=m_exp,
                          lo_excised=lo_exc, hi_excised=hi_exc,
                          lo_value=0.0,
                          hi_value=0.0 if hi_exc else hi_val,
                          tube_k=tube_k)


def _point_at(n, r):
    x = np.zeros(n)
    x[0] = r
    return x


def slab_geometry(n, length, num_cells, hi_value=None, params=None):
    """Half-space test slab: v = 0 at height 0, linear data at the top."""
    params = params or SolverParams()
    nodes = grids.graded_nodes(0.0, length, num_cells, grade_lo=True,
                               ratio=params.grading_ratio,
                               stretch=params.grading_stretch)
    return RadialGeometry(kind=SLAB, n=n, nodes=nodes, m_exp=0,
                          lo_excised=True, hi_excised=False,
                          hi_value=float(length if hi_value is None else hi_value))


def annulus_geometry(n, r_in, r_out, num_cells, params=None):
    """Both boundaries excised (v = 0): spherical-shell domains, e.g. from
    two-cap sphere transfers."""
    params = params or SolverParams()
    nodes = grids.graded_nodes(r_in, r_out, num_cells, grade_lo=True,
                               grade_hi=True, ratio=params.grading_ratio,
                               stretch=params.grading_stretch)
    return RadialGeometry(kind=ANNULUS, n=n, nodes=nodes, m_exp=n - 1,
                          lo_excised=True, hi_excised=True)


def solve_radial_geometry(geom, params, source=None, v_init=None):
    """Newton solve on a prepared radial geometry."""
    nodes = geom.nodes
    axis_lo = geom.axis_at_lo
    if v_init is None:
        v_init = _default_init(geom)
    v = np.asarray(v_init, dtype=float).copy()
    if geom.lo_excised:
        v[0] = 0.0
    elif not axis_lo:
        v[0] = geom.lo_value
    v[-1] = 0.0 if geom.hi_excised else geom.hi_value
    v, iters, res = _newton(nodes, v, geom.m_exp, geom.n, params,
                            s_curv=0.0, source=source, axis_lo=axis_lo)
    return SampledField(geometry=geom, v=v, converged=True, residual=res,
                        newton_iters=iters)


def _default_init(geom):
    """Initial guess: distance to the excised boundary near it (matching the
    leading boundary expansion v ~ d), bent quadratically to meet the outer
    Dirichlet data, which keeps Newton in its basin even when the data sits
    orders of magnitude above the boundary layer."""
    nodes = geom.nodes
    if geom.lo_excised and geom.hi_excised:
        return np.minimum(nodes - nodes[0], nodes[-1] - nodes)
    if geom.kind == BALL_INTERIOR:
        rr = nodes[-1]
        return (rr * rr - nodes * nodes) / (2.0 * rr)
    d = nodes - nodes[0]
    w = nodes[-1] - nodes[0]
    if geom.kind == SLAB:
        return d * (geom.hi_value / w)
    return d + (geom.hi_value - w) * (d / w) ** 2


def solve_radial(dom, params=None, required_nodes=(), num_cells=None,
                 truncation_data="asymptote", source=None, nodes=None,
                 bracket=None):
    """Solve the curvature equation on a radial DomainSpec.

    bracket, when given, is a pair of oracle specs (sub, super) in u-terms;
    the converged solution is checked to lie between their samples nodewise
    (within 10 tol) and BracketViolation is raised otherwise.
    """
    params = params or SolverParams()
    geom = build_radial_geometry(dom, params, required_nodes, num_cells,
                                 truncation_data, nodes)
    field = solve_radial_geometry(geom, params, source=source)
    if bracket is not None:
        check_radial_bracket(field, bracket, 10.0 * params.tol)
    return field


def check_radial_bracket(field, bracket, tol):
    """Nodewise sub <= u <= super check against sampled closed forms."""
    sub_spec, super_spec = bracket
    geom = field.geometry
    interior = slice(1, len(geom.nodes) - 1)
    u = field.u()[interior]
    lo = np.array([oracles.oracle_u(sub_spec, _embed_point(geom, r))
                   for r in geom.nodes[interior]])
    hi = np.array([oracles.oracle_u(super_spec, _embed_point(geom, r))
                   for r in geom.nodes[interior]])
    if np.any(u < lo - tol) or np.any(u > hi + tol):
        worst = max(float(np.max(lo - u)), float(np.max(u - hi)))
        raise BracketViolation(
            f"solution exits the closed-form bracket by {worst:.3e}")


def _embed_point(geom, r):
    x = np.array(geom.center, dtype=float)
    if geom.kind == TUBE:
        x = np.zeros(geom.n)
        x[geom.tube_k] = r
    elif geom.kind == SLAB:
        x = np.zeros(geom.n)
        x[-1] = r
    else:
        x[0] += r
    return x


def monotone_bracket(dom, sub, super_, params=None, num_cells=None,
                     required_nodes=(), nodes=None):
    """Bracketing solves between an ordered subsolution/supersolution pair.

    sub and super_ are closed-form specs in u terms; their samples must be
    ordered on the grid (BracketOrderViolation otherwise).  Each barrier
    supplies the truncation data and the starting iterate of one damped
    Newton run; the two converged fields are returned as (lower, upper) with
    the nodewise gap recorded on both.  The combined iteration budget is
    10x max_newton (NonConvergence beyond), and the results are checked to
    be ordered and inside the sampled bracket to 10x tol.
    """
    params = params or SolverParams()
    tol10 = 10.0 * params.tol
    if dom.symmetry == "axisymmetric":
        from . import axisym
        return axisym.solve_axisymmetric_bracket(dom, params)

    geom = build_radial_geometry(dom, params, required_nodes=required_nodes,
                                 num_cells=num_cells, nodes=nodes)
    sub_parts = _barrier_parts(sub, geom)
    sup_parts = _barrier_parts(super_, geom)
    pts = [_embed_point(geom, r) for r in geom.nodes]
    u_sub = np.array([sum(oracles.oracle_u(s, x) for s in sub_parts)
                      for x in pts[1:]])
    u_sup = np.array([sum(oracles.oracle_u(s, x) for s in sup_parts)
                      for x in pts[1:]])
    if np.any(u_sub > u_sup * (1.0 + 1e-13)):
        raise BracketOrderViolation("sub exceeds super on the grid")
    v_sub = u_sub ** (-2.0 / (geom.n - 2.0))
    v_sup = u_sup ** (-2.0 / (geom.n - 2.0))

    budget = 10 * params.max_newton
    fields = []
    used = 0
    for u_data, v_profile in ((u_sub, v_sub), (u_sup, v_sup)):
        g = RadialGeometry(kind=geom.kind, n=geom.n, nodes=geom.nodes,
                           m_exp=geom.m_exp, lo_excised=geom.lo_excised,
                           hi_excised=geom.hi_excised,
                           lo_value=geom.lo_value,
                           hi_value=float(v_profile[-1]),
                           center=geom.center, tube_k=geom.tube_k)
        init = np.concatenate([[0.0 if g.lo_excised else v_profile[0]],
                               v_profile])
        try:
            fld = solve_radial_geometry(g, params, v_init=init)
        except NewtonDiverged as exc:
            raise NonConvergence(f"bracketing solve stalled: {exc}")
        used += fld.newton_iters
        if used > budget:
            raise NonConvergence(
                f"iteration budget 10*max_newton = {budget} exhausted")
        fields.append(fld)
    lower, upper = fields
    # ordering and bracket membership, in the boundary-regular variable
    if np.max(upper.v[1:] - lower.v[1:]) > tol10:
        raise BracketViolation("bracket solves are out of order")
    for fld in fields:
        if (np.max(v_sup - fld.v[1:]) > tol10
                or np.max(fld.v[1:] - v_sub) > tol10):
            raise BracketViolation("solution exits the sampled bracket")
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = float(np.nanmax(np.abs(upper.u()[1:-1] - lower.u()[1:-1])))
    lower.bracket_gap = upper.bracket_gap = gap
    return lower, upper


def _barrier_parts(barrier, geom):
    """Normalize a barrier (spec or sequence of specs, summed in u) and
    check compatibility with the grid symmetry."""
    parts = list(barrier) if isinstance(barrier, (list, tuple)) else [barrier]
    for spec in parts:
        sym_ok = True
        if spec.kind == oracles.EXTERIOR_BALL:
            sym_ok = np.linalg.norm(spec.center - geom.center) < 1e-12
        elif spec.kind in (oracles.GREEN_POLE, oracles.MULTIPOLE):
            sym_ok = all(np.linalg.norm(p - geom.center) < 1e-12
                         for p in spec.poles)
        elif spec.kind == oracles.TUBE_COMPLEMENT:
            sym_ok = geom.kind == TUBE and spec.tube_k == geom.tube_k
        elif spec.kind == oracles.TWO_BALL_SUPER:
            sym_ok = False
        if not sym_ok:
            raise ValueError(
                f"barrier {spec.kind} breaks the grid's radial symmetry")
    return parts


def residual_norm(field, source=None):
    """Discrete sup-norm of the equation residual over interior nodes,
    measured in the backward-error scaling (see radial_residual)."""
    geom = field.geometry
    if isinstance(geom, RadialGeometry):
        f, scale = radial_residual(geom.nodes, field.v, geom.m_exp, geom.n,
                                   source=source, axis_lo=geom.axis_at_lo,
                                   with_scale=True)
        lo = 0 if geom.axis_at_lo else 1
        sl = slice(lo, len(geom.nodes) - 1)
        return float(np.max(np.abs(f[sl]) / np.maximum(1.0, scale[sl])))
    from . import axisym
    return axisym.residual_norm(field)
