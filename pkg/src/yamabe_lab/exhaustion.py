"""Domain schedules, batched solves across them, and the normalized limits.

A schedule shrinks the excised regions geometrically (r_i = r0 * q^i),
optionally coupling a second ball through rhat_i = r_i^k.  Three families
are supported:

    radial    one origin ball in flat R^n; one master radial mesh graded to
              the final radius carries every index (all scheduled radii are
              mesh nodes), so fields across indices share nodes exactly.
    tube      a solid coordinate tube; per-index meshes are exact scaled
              copies of the base mesh, so the scaling identity
              u_i(x) = r_i^{-(n-2)/2} u_0(x / r_i) can be checked nodewise.
    two_ball  collinear balls, axisymmetric solves on one fixed mesh whose
              clustering resolves every scheduled radius.

Per index the run records the solve diagnostics, the normalization minimum
m_i over a configured annulus, and sup |Ric| over configured near/far
regions; the monotone-in-i solution property is checked on shared nodes.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dfield
from typing import List, Optional, Tuple

import numpy as np

from . import axisym, grids, oracles, radial
from .conformal import Background, FLAT, u_from_v
from .domain import (BallExclusion, DomainSpec, SolverParams, TubeExclusion,
                     check_tube_k)
from .errors import (DegenerateBasis, NonMonotoneSchedule,
                     OverlappingExclusions, YamabeLabError)
from .fields import ricci_grid, ricci_profile

RADIAL_KIND = "radial"
TUBE_KIND = "tube"
TWO_BALL_KIND = "two_ball"


def worker_count():
    env = os.environ.get("YAMABE_LAB_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def coupling_threshold_ok(n, k):
    """The far-side gradient estimates need (n-2)(k-1)/2 > n+3."""
    return (n - 2) * (k - 1) / 2.0 > n + 3


@dataclass(frozen=True, eq=False)
class ExhaustionSchedule:
    kind: str
    n: int
    radii: Tuple[float, ...]
    rhat: Optional[Tuple[float, ...]] = None
    truncation: float = 32.0
    tube_k: int = 0
    centers: Optional[np.ndarray] = None  # (2, n) for two_ball
    coupling_exponent: Optional[float] = None
    threshold_ok: bool = True

    @property
    def indices(self):
        return range(len(self.radii))


def build_schedule(kind, n, r0=None, q=None, i_max=None, radii=None,
                   rhat=None, coupling_exponent=None, truncation=32.0,
                   tube_k=0, centers=None):
    """Validated schedule from a geometric law or explicit radius tables."""
    if radii is None:
        if not (r0 and q and i_max is not None) or not 0.0 < q < 1.0:
            raise NonMonotoneSchedule("need r0 > 0, 0 < q < 1 and i_max")
        radii = tuple(r0 * q ** i for i in range(i_max + 1))
    radii = tuple(float(r) for r in radii)
    if any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])) or radii[-1] <= 0:
        raise NonMonotoneSchedule("radii must be strictly decreasing and positive")

    threshold_ok = True
    if kind == TWO_BALL_KIND:
        centers = np.asarray(centers, dtype=float)
        if coupling_exponent is not None:
            rhat = tuple(r ** coupling_exponent for r in radii)
            threshold_ok = coupling_threshold_ok(n, coupling_exponent)
        elif rhat is None:
            rhat = radii  # equal-radius schedule
        rhat = tuple(float(r) for r in rhat)
        if any(r2 >= r1 for r1, r2 in zip(rhat, rhat[1:])):
            raise NonMonotoneSchedule("coupled radii must decrease strictly")
        dist = float(np.linalg.norm(centers[1] - centers[0]))
        for r, rh in zip(radii, rhat):
            if r + rh >= dist:
                raise OverlappingExclusions(
                    f"balls of radii {r}, {rh} overlap at separation {dist}")
        if max(radii) >= truncation or max(rhat) >= truncation:
            raise OverlappingExclusions("exclusions reach the truncation shell")
    elif kind == TUBE_KIND:
        check_tube_k(n, tube_k)
    elif kind == RADIAL_KIND:
        if max(radii) >= truncation:
            raise OverlappingExclusions("ball reaches the truncation shell")
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return ExhaustionSchedule(kind=kind, n=n, radii=radii, rhat=rhat,
                              truncation=truncation, tube_k=tube_k,
                              centers=centers,
                              coupling_exponent=coupling_exponent,
                              threshold_ok=threshold_ok)


@dataclass(eq=False)
class IndexRecord:
    i: int
    r: float
    rhat: Optional[float]
    field: object                 # main field (upper solve for two_ball)
    lower: object = None
    m: float = np.nan
    sup_near: float = np.nan
    sup_far: float = np.nan

    @property
    def bracket_gap(self):
        return self.field.bracket_gap


@dataclass(eq=False)
class ExhaustionRun:
    schedule: ExhaustionSchedule
    records: List[IndexRecord]
    monotonicity_violation: float = np.nan
    meta: dict = dfield(default_factory=dict)

    def sup_near_sequence(self):
        return np.array([rec.sup_near for rec in self.records])

    def sup_far_sequence(self):
        return np.array([rec.sup_far for rec in self.records])

    def m_sequence(self):
        return np.array([rec.m for rec in self.records])


@dataclass(frozen=True)
class StatsConfig:
    """Regions for normalization minima and curvature statistics.

    m_i is the minimum of u over the closed annulus delta/2 <= d <= delta
    around the distinguished point; sup |Ric| is reported over the ball of
    radius near_radius around the near point and over the complement of the
    ball of radius far_radius around it.
    """

    anchor: Tuple[float, ...] = None   # distinguished point (defaults inside)
    delta: float = 1.0
    near_point: Tuple[float, ...] = None
    near_radius: float = 0.25
    far_radius: float = 0.5
    far_max: float = np.inf  # cap on the far scan; differentiating discrete
                             # data where v ~ r^2/r_in amplifies solver noise


def run_exhaustion(schedule, params=None, stats=None, solver_kwargs=None):
    """Solve every index of the schedule and collect records.

    Indices run on a bounded thread pool (YAMABE_LAB_THREADS, default the
    logical core count); records are assembled in index order regardless of
    completion order.
    """
    params = params or SolverParams()
    stats = stats or _default_stats(schedule)
    solver_kwargs = solver_kwargs or {}
    prep = _prepare(schedule, params, stats, solver_kwargs)

    def job(i):
        try:
            return prep["solve"](i)
        except YamabeLabError as exc:
            raise type(exc)(f"index {i} (r = {schedule.radii[i]:g}): {exc}") \
                from exc

    nw = min(worker_count(), len(schedule.radii))
    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            fields = list(pool.map(job, schedule.indices))
    else:
        fields = [job(i) for i in schedule.indices]

    records = []
    for i, solved in zip(schedule.indices, fields):
        main, lower = solved if isinstance(solved, tuple) else (solved, None)
        rec = IndexRecord(i=i, r=schedule.radii[i],
                          rhat=schedule.rhat[i] if schedule.rhat else None,
                          field=main, lower=lower)
        _fill_stats(schedule, stats, rec)
        records.append(rec)
    run = ExhaustionRun(schedule=schedule, records=records, meta=prep["meta"])
    run.monotonicity_violation = _monotonicity_violation(run)
    return run


def _default_stats(schedule):
    n = schedule.n
    if schedule.kind == TWO_BALL_KIND:
        p2 = tuple(schedule.centers[1])
        return StatsConfig(anchor=p2, delta=min(1.0, 0.5 * float(
            np.linalg.norm(schedule.centers[1] - schedule.centers[0]))),
            near_point=p2, near_radius=0.25, far_radius=0.5)
    if schedule.kind == TUBE_KIND:
        origin = tuple(np.zeros(n))
        return StatsConfig(anchor=origin, delta=2.0, near_point=origin,
                           near_radius=0.5, far_radius=1.0,
                           far_max=32.0 * schedule.radii[-1])
    origin = tuple(np.zeros(n))
    return StatsConfig(anchor=origin, delta=2.0, near_point=origin,
                       near_radius=2.0, far_radius=4.0,
                       far_max=schedule.truncation / 4.0)


def _prepare(schedule, params, stats, solver_kwargs):
    """Build the per-kind solve closure and shared meshes."""
    n = schedule.n
    bg = Background(FLAT, n)
    meta = {}
    if schedule.kind == RADIAL_KIND:
        r_min = schedule.radii[-1]
        anchor_r = np.linalg.norm(np.asarray(stats.anchor)) if stats.anchor else 0.0
        required = sorted(set(list(schedule.radii)
                              + [stats.delta / 2.0 + anchor_r,
                                 stats.delta + anchor_r]))
        master = grids.graded_nodes(r_min, schedule.truncation,
                                    params.grid_radial, grade_lo=True,
                                    ratio=params.grading_ratio,
                                    stretch=params.grading_stretch)
        master = grids.snap_nodes(master, required)
        meta["master_nodes"] = master

        def solve(i):
            r_i = schedule.radii[i]
            start = int(np.argmin(np.abs(master - r_i)))
            dom = DomainSpec(bg, (BallExclusion(np.zeros(n), r_i),),
                             schedule.truncation)
            return radial.solve_radial(dom, params, nodes=master[start:],
                                       **solver_kwargs)

    elif schedule.kind == TUBE_KIND:
        # cell count divisible by 6: halving schedules then shift the
        # log-uniform mesh (span 64 = 2^6) onto itself, so consecutive
        # indices share physical nodes exactly
        cells = 6 * ((params.grid_radial + 5) // 6)
        base = grids.log_nodes(schedule.radii[0],
                               schedule.radii[0] * 64.0, cells)
        meta["base_nodes"] = base

        def solve(i):
            scale = schedule.radii[i] / schedule.radii[0]
            dom = DomainSpec(bg, (TubeExclusion(schedule.tube_k,
                                                schedule.radii[i]),),
                             schedule.radii[i] * 64.0)
            return radial.solve_radial(dom, params, nodes=base * scale,
                                       **solver_kwargs)

    else:  # two_ball
        centers = schedule.centers
        resolve = [schedule.radii[-1], (schedule.rhat or schedule.radii)[-1]]
        dom0 = DomainSpec(bg, (BallExclusion(centers[0], schedule.radii[0]),
                               BallExclusion(centers[1], (schedule.rhat
                                                          or schedule.radii)[0])),
                          schedule.truncation, symmetry="axisymmetric")
        geom = axisym.build_axisym_geometry(dom0, params,
                                            resolve_radius=resolve,
                                            **solver_kwargs)
        meta["geometry"] = geom

        def solve(i):
            dom = DomainSpec(bg, (BallExclusion(centers[0], schedule.radii[i]),
                                  BallExclusion(centers[1],
                                                schedule.rhat[i])),
                             schedule.truncation, symmetry="axisymmetric")
            gi = axisym.AxisymGeometry(
                n=n, z_nodes=geom.z_nodes, p_nodes=geom.p_nodes,
                circles=tuple((float((b.center - geom.origin) @ geom.axis_unit),
                               b.radius) for b in dom.exclusions),
                axis_unit=geom.axis_unit, origin=geom.origin)
            return axisym.solve_axisymmetric_bracket(dom, params, geom=gi)[::-1]

    return {"solve": solve, "meta": meta}


def _fill_stats(schedule, stats, rec):
    fld = rec.field
    n = schedule.n
    geom = fld.geometry
    if schedule.kind in (RADIAL_KIND, TUBE_KIND):
        nodes = geom.nodes
        u = fld.u()
        anchor = np.asarray(stats.anchor if stats.anchor is not None
                            else np.zeros(n))
        a_r = geom.radius_of(anchor)
        lo, hi = a_r + stats.delta / 2.0, a_r + stats.delta
        sel = (nodes >= lo - 1e-12) & (nodes <= hi + 1e-12)
        if np.any(sel):
            rec.m = float(np.min(u[sel]))
        radii_sc, extremal, _ = ricci_profile(fld)
        near = np.abs(radii_sc - a_r) <= stats.near_radius
        far = (radii_sc >= a_r + stats.far_radius) & (radii_sc <= stats.far_max)
        if schedule.kind == TUBE_KIND:
            # the anchor sits on the excised axis; the interesting scale
            # tracks the shrinking tube, so the window is relative
            near = radii_sc <= max(stats.near_radius, 3.0 * rec.r)
        if np.any(near):
            rec.sup_near = float(np.max(extremal[near]))
        if np.any(far):
            rec.sup_far = float(np.max(extremal[far]))
    else:
        zc, rho_c = geom.cylinder_coords(np.asarray(stats.anchor))
        zs, ps, extremal = ricci_grid(fld)
        d_anchor = np.sqrt((zs - zc) ** 2 + (ps - rho_c) ** 2)
        near_z, near_p = geom.cylinder_coords(np.asarray(stats.near_point))
        d_near = np.sqrt((zs - near_z) ** 2 + (ps - near_p) ** 2)
        if np.any(d_near <= stats.near_radius):
            rec.sup_near = float(np.max(extremal[d_near <= stats.near_radius]))
        far = (d_near >= stats.far_radius) & (d_near <= stats.far_max)
        if np.any(far):
            rec.sup_far = float(np.max(extremal[far]))
        Z, P = geom.z_nodes, geom.p_nodes
        dmesh = np.sqrt((Z[:, None] - zc) ** 2 + (P[None, :] - rho_c) ** 2)
        ann = (dmesh >= stats.delta / 2.0) & (dmesh <= stats.delta) \
            & np.isfinite(fld.v) & (fld.v > 0)
        if np.any(ann):
            rec.m = float(np.min(u_from_v(fld.v[ann], n)))


def _monotonicity_violation(run):
    """max over consecutive pairs of (u_{i+1} - u_i) = (v in reverse) on
    shared nodes; the maximum principle makes solutions decrease in i."""
    worst = 0.0
    sched = run.schedule
    for ra, rb in zip(run.records, run.records[1:]):
        fa, fb = ra.field, rb.field
        if sched.kind == RADIAL_KIND:
            na, nb = fa.geometry.nodes, fb.geometry.nodes
            off = len(nb) - len(na)
            if off < 0 or not np.allclose(nb[off:], na, rtol=0, atol=1e-14):
                continue
            # u_a >= u_b  <=>  v_a <= v_b on the shared interior
            viol = np.max(fa.v[1:-1] - fb.v[off + 1:-1])
        elif sched.kind == TUBE_KIND:
            # compare on physically shared radii via the log-grid overlap
            na, nb = fa.geometry.nodes, fb.geometry.nodes
            shared_b = np.isin(np.round(np.log(nb), 12),
                               np.round(np.log(na), 12))
            shared_a = np.isin(np.round(np.log(na), 12),
                               np.round(np.log(nb), 12))
            if not np.any(shared_b):
                continue
            viol = np.max(fa.v[shared_a] - fb.v[shared_b])
        else:
            ok = (np.isfinite(fa.v) & np.isfinite(fb.v)
                  & (fa.v > 0) & (fb.v > 0))
            ok[[0, -1], :] = False
            ok[:, -1] = False
            if not np.any(ok):
                continue
            viol = np.max(fa.v[ok] - fb.v[ok])
        worst = max(worst, float(viol))
    return worst


# ---------------------------------------------------------------------------
# normalized limits
# ---------------------------------------------------------------------------

def normalization_slope(run):
    """Log-log slope of m_i against r_i (the (n-2)/2 scaling check)."""
    m = run.m_sequence()
    r = np.array([rec.r for rec in run.records])
    good = np.isfinite(m) & (m > 0)
    if np.count_nonzero(good) < 2:
        return np.nan
    return float(np.polyfit(np.log(r[good]), np.log(m[good]), 1)[0])


def fit_points(run, d_min=0.3, d_max=0.6, poles=None):
    """Grid points whose distance to every pole lies in [d_min, d_max]."""
    sched = run.schedule
    fld = run.records[0].field
    geom = fld.geometry
    if sched.kind == TWO_BALL_KIND:
        poles = np.asarray(poles if poles is not None else sched.centers)
        Z, P = geom.z_nodes, geom.p_nodes
        pts = []
        for i, z in enumerate(Z[1:-1], start=1):
            for j, p in enumerate(P[:-1]):
                x = geom.point_in_plane(z, p)
                d = np.linalg.norm(poles - x, axis=1)
                if np.all((d >= d_min) & (d <= d_max)):
                    pts.append((i, j, x))
        return pts
    nodes = geom.nodes
    pts = []
    for j in range(1, len(nodes) - 1):
        if d_min <= nodes[j] <= d_max:
            # store the radius: index positions shift across the schedule
            pts.append((float(nodes[j]), None,
                        radial._embed_point(geom, nodes[j])))
    return pts


def rescale_and_fit(run, basis, d_min=0.3, d_max=0.6, poles=None):
    """Least-squares fit of w_i = u_i / m_i against closed-form basis
    functions on a compact region away from the poles.

    basis: list of OracleSpec (evaluated through oracle_u) and/or the string
    "const".  Returns (coefficients[i, b], residuals[i], condition).
    """
    if len(run.records) < 2:
        raise ValueError("need at least two indices to inspect convergence")
    pts = fit_points(run, d_min, d_max, poles)
    if not pts:
        raise ValueError("empty fit region")
    cols = []
    for b in basis:
        if isinstance(b, str) and b == "const":
            cols.append(np.ones(len(pts)))
        else:
            cols.append(np.array([oracles.oracle_u(b, x) for _, _, x in pts]))
    phi = np.stack(cols, axis=1)
    sing = np.linalg.svd(phi, compute_uv=False)
    cond = float(sing[0] / sing[-1]) if sing[-1] > 0 else np.inf
    if cond > 1e12:
        raise DegenerateBasis(f"basis Gram condition {cond:.3e} > 1e12")

    coeffs = []
    residuals = []
    for rec in run.records:
        fld = rec.field
        u = fld.u()
        if run.schedule.kind == TWO_BALL_KIND:
            w = np.array([u[i, j] for i, j, _ in pts]) / rec.m
        else:
            nodes = fld.geometry.nodes
            w = np.array([u[int(np.argmin(np.abs(nodes - rad)))]
                          for rad, _, _ in pts]) / rec.m
        sol, *_ = np.linalg.lstsq(phi, w, rcond=None)
        coeffs.append(sol)
        resid = np.linalg.norm(w - phi @ sol) / np.linalg.norm(w)
        residuals.append(float(resid))
    return np.array(coeffs), np.array(residuals), cond


def self_similarity_violation(run):
    """Tube schedules: nodewise deviation of u_i from the rescaled base
    solution (exact under the scaled meshes, up to solver tolerance)."""
    if run.schedule.kind != TUBE_KIND:
        raise ValueError("self-similarity applies to tube schedules")
    n = run.schedule.n
    base = run.records[0]
    worst = 0.0
    for rec in run.records[1:]:
        scale = rec.r / base.r
        expected = scale * base.field.v  # v_i(s) = scale * v_0(s / scale)
        worst = max(worst, float(np.max(np.abs(rec.field.v - expected))))
    return worst
