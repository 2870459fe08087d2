"""Run orchestration and persistence: run.csv, binary field cache, SVG plots,
and the human-readable report.

run.csv is the canonical output; its body (everything after the timestamp
header line) is byte-deterministic for a fixed scenario and version.  Plots
are generated from the parsed CSV rows, never from a separate numeric path.
Field caches use the "YMBF" magic with an explicit format version; any
mismatch forces recompute.
"""

import csv
import hashlib
import io
import json
import os
import struct
from datetime import datetime, timezone

import numpy as np

from . import exhaustion as ex
from . import oracles, probes
from .errors import IoError, MissingReport
from .fields import AxisymGeometry, RadialGeometry, SampledField

FORMAT_VERSION = 1
MAGIC = b"YMBF"

CSV_COLUMNS = ["i", "r_i", "rhat_i", "newton_iters", "residual",
               "bracket_gap", "m_i", "sup_ric_near", "sup_ric_far",
               "probe_id", "probe_Rnn", "pinch_flag", "verdict"]


# ---------------------------------------------------------------------------
# binary field cache
# ---------------------------------------------------------------------------

def _geometry_doc(geom):
    if isinstance(geom, RadialGeometry):
        return {"type": "radial", "kind": geom.kind, "n": geom.n,
                "m_exp": geom.m_exp, "tube_k": geom.tube_k,
                "lo_excised": geom.lo_excised, "hi_excised": geom.hi_excised,
                "lo_value": geom.lo_value, "hi_value": geom.hi_value,
                "center": list(map(float, geom.center))}
    if isinstance(geom, AxisymGeometry):
        return {"type": "axisym", "n": geom.n,
                "circles": [[zc, rc] for zc, rc in geom.circles],
                "axis_unit": list(map(float, geom.axis_unit)),
                "origin": list(map(float, geom.origin))}
    raise IoError(f"unsupported geometry {type(geom)!r}")


def _geometry_from_doc(doc, arrays):
    if doc["type"] == "radial":
        return RadialGeometry(kind=doc["kind"], n=int(doc["n"]),
                              nodes=arrays["nodes"], m_exp=int(doc["m_exp"]),
                              lo_excised=bool(doc["lo_excised"]),
                              hi_excised=bool(doc["hi_excised"]),
                              lo_value=float(doc["lo_value"]),
                              hi_value=float(doc["hi_value"]),
                              center=np.asarray(doc["center"]),
                              tube_k=int(doc["tube_k"]))
    return AxisymGeometry(n=int(doc["n"]), z_nodes=arrays["z_nodes"],
                          p_nodes=arrays["p_nodes"],
                          circles=tuple((a, b) for a, b in doc["circles"]),
                          axis_unit=np.asarray(doc["axis_unit"]),
                          origin=np.asarray(doc["origin"]))


def save_field(path, field, key=""):
    """Write a field cache record (versioned header + raw LE float64)."""
    geom = field.geometry
    arrays = {}
    if isinstance(geom, RadialGeometry):
        arrays["nodes"] = geom.nodes
    else:
        arrays["z_nodes"] = geom.z_nodes
        arrays["p_nodes"] = geom.p_nodes
    arrays["v"] = field.v
    head = {"geometry": _geometry_doc(geom), "key": key,
            "diagnostics": {"converged": bool(field.converged),
                            "residual": float(field.residual),
                            "newton_iters": int(field.newton_iters),
                            "bracket_gap": float(field.bracket_gap)},
            "arrays": [{"name": k, "shape": list(np.shape(a))}
                       for k, a in arrays.items()]}
    blob = json.dumps(head, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, geom.n))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in arrays.items():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_field(path, expect_key=None):
    """Read a cache record; returns None on any magic/version/key mismatch
    (forcing recompute rather than best-effort reads)."""
    try:
        with open(path, "rb") as fh:
            if fh.read(4) != MAGIC:
                return None
            version, _n = struct.unpack("<II", fh.read(8))
            if version != FORMAT_VERSION:
                return None
            (jlen,) = struct.unpack("<I", fh.read(4))
            head = json.loads(fh.read(jlen).decode())
            if expect_key is not None and head.get("key") != expect_key:
                return None
            arrays = {}
            for spec in head["arrays"]:
                count = int(np.prod(spec["shape"])) if spec["shape"] else 1
                raw = np.frombuffer(fh.read(8 * count), dtype="<f8")
                arrays[spec["name"]] = raw.reshape(spec["shape"]).copy()
    except (OSError, ValueError, KeyError, json.JSONDecodeError):
        return None
    geom = _geometry_from_doc(head["geometry"], arrays)
    diag = head["diagnostics"]
    return SampledField(geometry=geom, v=arrays["v"],
                        converged=diag["converged"],
                        residual=diag["residual"],
                        newton_iters=diag["newton_iters"],
                        bracket_gap=diag["bracket_gap"])


def scenario_key(scn, index, role):
    """Cache key: format version + every numeric the solve depends on."""
    doc = {"format": FORMAT_VERSION, "n": scn.n, "kind": scn.schedule_kind,
           "background": scn.background,
           "r0": scn.r0, "q": scn.q, "i_max": scn.i_max,
           "radii": list(scn.radii) if scn.radii else None,
           "rhat": list(scn.rhat) if scn.rhat else None,
           "coupling": scn.coupling_exponent,
           "truncation": scn.truncation, "tube_k": scn.tube_k,
           "centers": None if scn.centers is None else scn.centers.tolist(),
           "solver": [scn.params.tol, scn.params.max_newton,
                      scn.params.grid_radial, list(scn.params.grid_axisym),
                      scn.params.grading_ratio, scn.params.grading_stretch],
           "index": index, "role": role}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# number formatting (shortest round-trip, deterministic)
# ---------------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    if np.isnan(xf):
        return ""
    return repr(xf)


# ---------------------------------------------------------------------------
# run driver
# ---------------------------------------------------------------------------

def build_schedule_from_scenario(scn):
    return ex.build_schedule(scn.schedule_kind, scn.n, r0=scn.r0, q=scn.q,
                             i_max=scn.i_max, radii=scn.radii, rhat=scn.rhat,
                             coupling_exponent=scn.coupling_exponent,
                             truncation=scn.truncation, tube_k=scn.tube_k,
                             centers=scn.centers)


def stats_from_scenario(scn, schedule):
    base = ex._default_stats(schedule)
    kw = {f: getattr(base, f) for f in
          ("anchor", "delta", "near_point", "near_radius", "far_radius",
           "far_max")}
    kw.update(scn.stats)
    return ex.StatsConfig(**kw)


def _field_paths(out_dir, scn, index):
    d = os.path.join(out_dir, "fields")
    names = {}
    for role in ("main", "lower"):
        key = scenario_key(scn, index, role)
        names[role] = (os.path.join(d, f"idx{index:03d}_{role}_{key}.bin"), key)
    return names


def run_scenario(scn, out_dir, solve=True):
    """Solve (or reload) the schedule, compute statistics/probes/fits and
    write every report artifact.  Returns a summary dict."""
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "fields"), exist_ok=True)
    schedule = build_schedule_from_scenario(scn)
    stats = stats_from_scenario(scn, schedule)

    run = None
    if scn.cache:
        run = _load_run(scn, out_dir, schedule, stats)
    if run is None:
        if not solve:
            raise MissingReport("no cached fields for this scenario")
        run = ex.run_exhaustion(schedule, scn.params, stats=stats)
        if scn.cache:
            _save_run(scn, out_dir, run)

    probe_rows, verdicts = _run_probes(scn, run)
    fit_summary = _run_fit(scn, run)
    rows = _csv_rows(run, probe_rows)
    _write_csv(os.path.join(out_dir, "run.csv"), rows)
    for plot in scn.plots:
        _write_plot(out_dir, plot, rows)
    summary = {
        "indices": len(run.records),
        "monotonicity_violation": run.monotonicity_violation,
        "m_slope": ex.normalization_slope(run),
        "verdicts": verdicts,
        "fit": fit_summary,
        "sup_near": run.sup_near_sequence().tolist(),
        "sup_far": run.sup_far_sequence().tolist(),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1, default=str)
    return summary


def _save_run(scn, out_dir, run):
    for rec in run.records:
        paths = _field_paths(out_dir, scn, rec.i)
        path, key = paths["main"]
        save_field(path, rec.field, key)
        if rec.lower is not None:
            path, key = paths["lower"]
            save_field(path, rec.lower, key)


def _load_run(scn, out_dir, schedule, stats):
    records = []
    for i in schedule.indices:
        paths = _field_paths(out_dir, scn, i)
        path, key = paths["main"]
        main = load_field(path, key) if os.path.exists(path) else None
        if main is None:
            return None
        lower = None
        lpath, lkey = paths["lower"]
        if os.path.exists(lpath):
            lower = load_field(lpath, lkey)
        rec = ex.IndexRecord(i=i, r=schedule.radii[i],
                             rhat=schedule.rhat[i] if schedule.rhat else None,
                             field=main, lower=lower)
        ex._fill_stats(schedule, stats, rec)
        records.append(rec)
    run = ex.ExhaustionRun(schedule=schedule, records=records,
                           meta={"from_cache": True})
    run.monotonicity_violation = ex._monotonicity_violation(run)
    return run


def _run_probes(scn, run):
    """Execute configured probes; returns per-(index, probe) cell values and
    the verdict map."""
    rows = {}
    verdicts = {}
    for spec in scn.probes:
        verdict = ""
        if np.isfinite(spec.rho):
            v = probes.classify(run, spec.point, spec.rho,
                                growth=scn.classify_growth,
                                threshold=(scn.classify_threshold_factor
                                           * probes._sup_whole(
                                               run.records[0].field)))
            verdict = v.classification
            verdicts[spec.id] = verdict
        for rec in run.records:
            rnn, pinch = "", ""
            if spec.kind == "segment":
                pr = probes.segment_probe(rec.field, spec.point,
                                          spec.direction, spec.epsilon)
                rnn, pinch = pr.ricci_nn, pr.pinch
            elif spec.kind == "arc":
                pr = probes.arc_probe(rec.field, spec.point, spec.x1,
                                      spec.arc_radius)
                rnn, pinch = pr.ricci_nn, pr.pinch
            rows[(rec.i, spec.id)] = (rnn, pinch, verdict)
    return rows, verdicts


def _run_fit(scn, run):
    if not scn.fit_basis or len(run.records) < 2:
        return None
    basis = []
    for item in scn.fit_basis:
        if item == "const":
            basis.append("const")
        elif item.startswith("green:"):
            coords = [float(t) for t in item[len("green:"):].split(",")]
            basis.append(oracles.green_pole(scn.n, np.asarray(coords)))
        else:
            raise IoError(f"unknown fit basis entry {item!r}")
    coeffs, residuals, cond = ex.rescale_and_fit(run, basis, scn.fit_d_min,
                                                 scn.fit_d_max)
    return {"coefficients": coeffs.tolist(), "residuals": residuals.tolist(),
            "condition": cond}


def _csv_rows(run, probe_rows):
    rows = []
    probe_ids = sorted({pid for (_, pid) in probe_rows}) or [""]
    for rec in run.records:
        for pid in probe_ids:
            rnn, pinch, verdict = probe_rows.get((rec.i, pid), ("", "", ""))
            rows.append([rec.i, rec.r, rec.rhat, rec.field.newton_iters,
                         rec.field.residual, rec.field.bracket_gap, rec.m,
                         rec.sup_near, rec.sup_far, pid, rnn, pinch, verdict])
    return rows


def _write_csv(path, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# yamabe-lab run {stamp} format={FORMAT_VERSION}\n")
            fh.write(buf.getvalue())
    except OSError as exc:
        raise IoError(str(exc))


def read_csv(path):
    """Rows of run.csv as dicts (header comment line skipped)."""
    if not os.path.exists(path):
        raise MissingReport(f"{path} not found")
    with open(path, "r", newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            fh.seek(0)
        reader = csv.DictReader(fh)
        return list(reader)


# ---------------------------------------------------------------------------
# plots (pure-SVG polylines generated from the CSV rows)
# ---------------------------------------------------------------------------

def _svg_plot(path, series, title, xlabel, ylabel, logx=False, logy=True):
    W, H, M = 640, 420, 60
    xs_all = [x for xs, _, _ in series for x in xs]
    ys_all = [y for _, ys, _ in series for y in ys if np.isfinite(y) and y > 0]
    if not xs_all or not ys_all:
        return
    fx = (lambda v: np.log10(v)) if logx else (lambda v: v)
    fy = (lambda v: np.log10(v)) if logy else (lambda v: v)
    x0, x1 = min(fx(x) for x in xs_all), max(fx(x) for x in xs_all)
    y0, y1 = min(fy(y) for y in ys_all), max(fy(y) for y in ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return M + (W - 2 * M) * (fx(x) - x0) / (x1 - x0)

    def py(y):
        return H - M - (H - 2 * M) * (fy(y) - y0) / (y1 - y0)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W/2:.1f}" y="20" text-anchor="middle" '
             f'font-size="14">{title}</text>',
             f'<line x1="{M}" y1="{H-M}" x2="{W-M}" y2="{H-M}" stroke="black"/>',
             f'<line x1="{M}" y1="{M}" x2="{M}" y2="{H-M}" stroke="black"/>',
             f'<text x="{W/2:.1f}" y="{H-15}" text-anchor="middle" '
             f'font-size="12">{xlabel}</text>',
             f'<text x="18" y="{H/2:.1f}" text-anchor="middle" font-size="12" '
             f'transform="rotate(-90 18 {H/2:.1f})">{ylabel}</text>']
    for k, (xs, ys, label) in enumerate(series):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys)
                       if np.isfinite(y) and (y > 0 or not logy))
        color = colors[k % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{W-M+4}" y="{M+16*k}" font-size="11" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def _write_plot(out_dir, plot, rows):
    seen = {}
    for row in rows:
        i = int(row[0])
        if i not in seen:
            seen[i] = row
    data = [seen[i] for i in sorted(seen)]
    if plot == "sup_ric":
        idx = [int(r[0]) for r in data]
        near = [_to_float(r[7]) for r in data]
        far = [_to_float(r[8]) for r in data]
        _svg_plot(os.path.join(out_dir, "sup_ric.svg"),
                  [(idx, near, "near"), (idx, far, "far")],
                  "sup |Ric| across the exhaustion", "index i", "sup |Ric|",
                  logx=False, logy=True)
    elif plot == "m_slope":
        rr = [_to_float(r[1]) for r in data]
        mm = [_to_float(r[6]) for r in data]
        _svg_plot(os.path.join(out_dir, "m_slope.svg"),
                  [(rr, mm, "m_i")],
                  "normalization minimum vs radius", "r_i", "m_i",
                  logx=True, logy=True)


def _to_float(cell):
    if cell in ("", None):
        return np.nan
    return float(cell)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def report(scn, out_dir):
    """Summarize run.csv and evaluate the scenario's assertions.

    Returns (text, ok); MissingReport propagates when run.csv is absent.
    """
    rows = read_csv(os.path.join(out_dir, "run.csv"))
    if not rows:
        raise MissingReport("run.csv has no rows")
    lines = []
    by_probe = {}
    per_index = {}
    for row in rows:
        i = int(row["i"])
        per_index[i] = row
        pid = row["probe_id"]
        if pid:
            by_probe[pid] = row
    lines.append(f"indices: {len(per_index)}")
    m = np.array([_to_float(per_index[i]["m_i"]) for i in sorted(per_index)])
    r = np.array([_to_float(per_index[i]["r_i"]) for i in sorted(per_index)])
    good = np.isfinite(m) & (m > 0)
    slope = np.nan
    if np.count_nonzero(good) >= 2:
        slope = float(np.polyfit(np.log(r[good]), np.log(m[good]), 1)[0])
        lines.append(f"fitted m-slope: {slope:.6f}")
    near = np.array([_to_float(per_index[i]["sup_ric_near"])
                     for i in sorted(per_index)])
    far = np.array([_to_float(per_index[i]["sup_ric_far"])
                    for i in sorted(per_index)])
    if np.all(np.isfinite(near)):
        lines.append(f"sup_ric_near: {near[0]:.6g} -> {near[-1]:.6g}")
    if np.all(np.isfinite(far)):
        lines.append(f"sup_ric_far:  {far[0]:.6g} -> {far[-1]:.6g}")
    iters = [int(per_index[i]["newton_iters"]) for i in sorted(per_index)]
    resid = [_to_float(per_index[i]["residual"]) for i in sorted(per_index)]
    lines.append(f"newton iterations: max {max(iters)}, "
                 f"worst residual {max(resid):.3g}")
    verdicts = {row["verdict"] for row in by_probe.values() if row["verdict"]}
    for pid, row in sorted(by_probe.items()):
        v = row["verdict"] or "(none)"
        lines.append(f"probe {pid}: verdict {v}")
    if verdicts == {"BoundedEvidence"} and np.all(np.isfinite(near)):
        lines.append(f"all probes bounded; curvature level ~ {near[-1]:.6g}")

    ok = True
    asserts = scn.assertions if scn else {}
    for pid, expected in (asserts.get("verdicts") or {}).items():
        actual = by_probe.get(pid, {}).get("verdict", "")
        good_v = actual == expected
        ok &= good_v
        lines.append(f"assert verdict[{pid}] == {expected}: "
                     f"{'pass' if good_v else f'FAIL (got {actual})'}")
    if "m_slope" in asserts:
        target = float(asserts["m_slope"])
        tol = float(asserts.get("m_slope_tol", 0.1))
        good_s = np.isfinite(slope) and abs(slope - target) <= tol
        ok &= good_s
        lines.append(f"assert |m_slope - {target}| <= {tol}: "
                     f"{'pass' if good_s else f'FAIL ({slope:.4f})'}")
    if "far_bounded_factor" in asserts and np.all(np.isfinite(far)):
        fac = float(asserts["far_bounded_factor"])
        good_f = np.max(far) <= fac * far[0]
        ok &= good_f
        lines.append(f"assert sup_far <= {fac} x first: "
                     f"{'pass' if good_f else 'FAIL'}")
    return "\n".join(lines), bool(ok)
