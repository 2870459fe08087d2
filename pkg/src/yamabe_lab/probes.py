"""Blow-up detection probes on solved fields.

Three constructions drive the diagnosis:

  segment probe   walk a straight ray from a boundary/limit point into the
                  domain, find where the directional derivative of v peaks;
                  an interior peak with vanishing second derivative and
                  v small against |grad v| marks a pinch, where the frame
                  Ricci component R_nn goes large and negative.
  pinch test      the inequality v + |d_nn v| <= eps |grad v| at a point.
  arc probe       the same walk along a circular arc joining two limit
                  points; the transverse curvature of the arc contributes
                  -f''(t) d_1 v to the path second derivative, an O(1/R)
                  term that dominates the decomposition at the peak.

classify() turns per-index curvature statistics over a small ball into a
verdict: numerical evidence for blow-up or boundedness, never proof.
"""

from dataclasses import dataclass, field as dfield

import numpy as np

from .conformal import Background, FLAT, ricci_nn_solved
from .errors import (InterpolationFailure, OutOfSupport, PathOutsideDomain,
                     RadiusTooSmall)
from .fields import (RadialGeometry, interp_axisym, interp_radial, jet2,
                     ricci_grid, ricci_profile)

PATH_SAMPLES = 1024


@dataclass(eq=False)
class ProbeResult:
    kind: str
    t_entry: float
    t_end: float
    t_peak: float
    deriv_at_peak: float
    second_deriv_at_peak: float
    pinch: bool
    ricci_nn: float
    epsilon: float
    transverse_term: float = np.nan
    samples: dict = dfield(default_factory=dict)


@dataclass(frozen=True, eq=False)
class BlowupVerdict:
    point: np.ndarray
    sups: np.ndarray
    classification: str
    threshold: float
    growth: float
    radius: float

BLOWUP = "BlowupEvidence"
BOUNDED = "BoundedEvidence"
INCONCLUSIVE = "Inconclusive"


# ---------------------------------------------------------------------------
# path machinery
# ---------------------------------------------------------------------------

def _inside(geom, x):
    if isinstance(geom, RadialGeometry):
        r = geom.radius_of(x)
        return geom.nodes[0] < r < geom.nodes[-1]
    z, p = geom.cylinder_coords(x)
    if not (geom.z_nodes[0] < z < geom.z_nodes[-1] and p < geom.p_nodes[-1]):
        return False
    for zc, rc in geom.circles:
        if (z - zc) ** 2 + p ** 2 <= rc * rc:
            return False
    return True


def _entry_exit(geom, path, t_lo, t_hi):
    """First entry into the domain after t_lo and the exit after it,
    bracketed on a fine parameter grid and bisected to 1e-12."""
    ts = np.linspace(t_lo, t_hi, 4 * PATH_SAMPLES)
    ins = np.array([_inside(geom, path(t)) for t in ts])
    if not np.any(ins):
        raise PathOutsideDomain("path never enters the solved domain")
    k0 = int(np.argmax(ins))
    t_entry = ts[k0]
    if k0 > 0:
        a, b = ts[k0 - 1], ts[k0]
        for _ in range(60):
            mid = 0.5 * (a + b)
            if _inside(geom, path(mid)):
                b = mid
            else:
                a = mid
        t_entry = b
    after = ~ins[k0:]
    if np.any(after):
        k1 = k0 + int(np.argmax(after))
        a, b = ts[k1 - 1], ts[k1]
        for _ in range(60):
            mid = 0.5 * (a + b)
            if _inside(geom, path(mid)):
                a = mid
            else:
                b = mid
        t_end = a
    else:
        t_end = t_hi
    return t_entry, t_end


def _sample_v(field, pts):
    geom = field.geometry
    if isinstance(geom, RadialGeometry):
        radii = np.array([geom.radius_of(x) for x in pts])
        return interp_radial(field, radii)
    zs, ps = [], []
    for x in pts:
        z, p = geom.cylinder_coords(x)
        zs.append(z)
        ps.append(p)
    return interp_axisym(field, zs, ps)


def _path_derivatives(ts, vs):
    """Second-order first/second derivatives on the uniform parameter grid
    (one-sided at the ends)."""
    dt = ts[1] - ts[0]
    d1 = np.gradient(vs, dt, edge_order=2)
    d2 = np.gradient(d1, dt, edge_order=2)
    return d1, d2


def _probe_along(field, path, tangent, t_entry, t_end, kind, epsilon,
                 transverse=None):
    ts = np.linspace(t_entry, t_end, PATH_SAMPLES)
    pts = [path(t) for t in ts]
    vs = _sample_v(field, pts)
    if not np.all(np.isfinite(vs)):
        raise InterpolationFailure("non-finite samples along the path")
    d1, d2 = _path_derivatives(ts, vs)
    k = int(np.argmax(d1))          # ties break toward smaller parameter
    interior = 0 < k < len(ts) - 1


    # the peak of a sampled derivative can sit one node off the true
    # critical point; the discrete second derivative there is bounded by
    # one grid modulus of d2
    path_tol = float(np.max(np.abs(np.diff(d2)))) if len(ts) > 2 else np.inf
    pinch = bool(interior and abs(d2[k]) <= path_tol)

    bg = Background(FLAT, field.n)
    ricci = np.nan
    trans = np.nan
    # the peak may sit on the boundary itself (v = 0, frame undefined);
    # evaluate the curvature at the nearest admissible sample inward
    step = 1 if k < len(ts) // 2 else -1
    for kk in range(k, k + step * 64, step):
        if not 0 <= kk < len(ts):
            break
        try:
            jet = jet2(field, pts[kk])
        except OutOfSupport:
            continue
        nu = tangent(ts[kk])
        nu = nu / np.linalg.norm(nu)
        ricci = ricci_nn_solved(bg, jet, nu)
        if transverse is not None:
            e1, fpp = transverse
            trans = -fpp(ts[kk]) * float(jet.gradient @ e1)
        break
    return ProbeResult(kind=kind, t_entry=t_entry, t_end=t_end, t_peak=ts[k],
                       deriv_at_peak=float(d1[k]),
                       second_deriv_at_peak=float(d2[k]), pinch=pinch,
                       ricci_nn=float(ricci), epsilon=epsilon,
                       transverse_term=float(trans),
                       samples={"t": ts, "v": vs, "dv": d1, "d2v": d2})


def segment_probe(field, x0, direction, epsilon):
    """Probe along x0 + t * direction, t in [0, epsilon]."""
    x0 = np.asarray(x0, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)

    def path(t):
        return x0 + t * d

    t_entry, t_end = _entry_exit(field.geometry, path, 0.0, float(epsilon))
    return _probe_along(field, path, lambda t: d, t_entry, t_end,
                        "segment", float(epsilon))


def arc_probe(field, x0, x1, radius):
    """Probe along the circular arc joining x0 and x1 that bulges by
    O(|x1-x0|^2 / radius) in a fixed transverse direction.

    With eps = |x1 - x0| / 2 and f(t) = sqrt(R^2 - (t-eps)^2) -
    sqrt(R^2 - eps^2), the path is x0 + t e_n + f(t) e_1; the report
    includes the transverse second-derivative term -f''(t) d_1 v at the
    peak, which is what makes an interior derivative peak usable when the
    straight segment would leave the domain.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    chord = x1 - x0
    L = float(np.linalg.norm(chord))
    radius = float(radius)
    if radius < 4.0 * L:
        raise RadiusTooSmall(f"need radius >= 4 |x1 - x0| = {4 * L:.6g}")
    eps = 0.5 * L
    e_n = chord / L
    e_1 = _transverse_unit(e_n)

    def f(t):
        return np.sqrt(radius ** 2 - (t - eps) ** 2) - np.sqrt(radius ** 2 - eps ** 2)

    def fp(t):
        return -(t - eps) / np.sqrt(radius ** 2 - (t - eps) ** 2)

    def fpp(t):
        g = radius ** 2 - (t - eps) ** 2
        return -1.0 / np.sqrt(g) - (t - eps) ** 2 / g ** 1.5

    def path(t):
        return x0 + t * e_n + f(t) * e_1

    def tangent(t):
        return e_n + fp(t) * e_1

    t_entry, t_end = _entry_exit(field.geometry, path, 0.0, 2.0 * eps)
    out = _probe_along(field, path, tangent, t_entry, t_end, "arc", eps,
                       transverse=(e_1, fpp))
    return out


def _transverse_unit(e_n):
    for k in range(len(e_n)):
        cand = np.zeros(len(e_n))
        cand[k] = 1.0
        cand = cand - float(cand @ e_n) * e_n
        norm = np.linalg.norm(cand)
        if norm > 0.5:
            return cand / norm
    raise ValueError("no transverse direction found")


def pinch_condition(field, x, direction, epsilon):
    """Test v(x) + |d_nn v(x)| <= eps |grad v(x)| from grid jets.

    Returns (flag, (v, |d_nn v|, |grad v|)).  Monotone in eps by
    construction.
    """
    nu = np.asarray(direction, dtype=float)
    nu = nu / np.linalg.norm(nu)
    jet = jet2(field, np.asarray(x, dtype=float))
    vnn = abs(float(nu @ jet.hessian @ nu))
    gnorm = float(np.linalg.norm(jet.gradient))
    flag = jet.value + vnn <= float(epsilon) * gnorm
    return bool(flag), (float(jet.value), vnn, gnorm)


# ---------------------------------------------------------------------------
# classification over exhaustion runs
# ---------------------------------------------------------------------------

def _scan(fld):
    """Cached (positions, extremal) curvature scan of a field."""
    cached = fld.meta.get("ricci_scan")
    if cached is not None:
        return cached
    geom = fld.geometry
    if isinstance(geom, RadialGeometry):
        radii, extremal, _ = ricci_profile(fld)
        out = ("radial", radii, extremal)
    else:
        zs, ps, extremal = ricci_grid(fld)
        out = ("axisym", (zs, ps), extremal)
    fld.meta["ricci_scan"] = out
    return out


def _sup_over_ball(fld, point, rho):
    kind, pos, extremal = _scan(fld)
    geom = fld.geometry
    if kind == "radial":
        r_pt = geom.radius_of(point)
        sel = np.abs(pos - r_pt) <= rho
    else:
        zc, pc = geom.cylinder_coords(point)
        zs, ps = pos
        sel = (zs - zc) ** 2 + (ps - pc) ** 2 <= rho * rho
    if not np.any(sel):
        return np.nan
    return float(np.max(extremal[sel]))


def _sup_whole(fld):
    _, _, extremal = _scan(fld)
    return float(np.max(extremal)) if len(extremal) else np.nan


def default_threshold(run):
    """10x the whole-domain curvature sup at the first index."""
    return 10.0 * _sup_whole(run.records[0].field)


def classify(run, point, rho, threshold=None, growth=1.2):
    """Blow-up verdict for the curvature statistics over B_rho(point).

    BlowupEvidence: the per-index sup grows by >= growth on each of the
    last two steps and its final value exceeds the threshold.
    BoundedEvidence: the whole sequence stays below the threshold band.
    Verdicts are numerical evidence, never proof.
    """
    point = np.asarray(point, dtype=float)
    rho = float(rho)
    cell = _min_cell(run.records[0].field.geometry)
    if rho <= 2.0 * cell:
        raise ValueError(f"classification radius {rho} under two grid cells")
    T = default_threshold(run) if threshold is None else float(threshold)
    sups = np.array([_sup_over_ball(rec.field, point, rho)
                     for rec in run.records])
    verdict = INCONCLUSIVE
    if np.all(np.isfinite(sups)) and len(sups) >= 3:
        s1, s2, s3 = sups[-3], sups[-2], sups[-1]
        if s3 >= growth * s2 and s2 >= growth * s1 and s3 > T:
            verdict = BLOWUP
        elif np.max(sups) <= T:
            verdict = BOUNDED
    return BlowupVerdict(point=point, sups=sups, classification=verdict,
                         threshold=T, growth=float(growth), radius=rho)


def _min_cell(geom):
    if isinstance(geom, RadialGeometry):
        return float(np.min(np.diff(geom.nodes)))
    return float(min(np.min(np.diff(geom.z_nodes)),
                     np.min(np.diff(geom.p_nodes))))
