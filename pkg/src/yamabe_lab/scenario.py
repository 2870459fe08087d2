"""Scenario files: TOML configuration, schema validation, typed access.

parse_scenario collects *all* schema violations (key path + reason) before
raising, so a bad file reports every problem at once.
"""

import sys
from dataclasses import dataclass, field as dfield
from typing import List, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .domain import SolverParams
from .errors import SchemaError

SCHEDULE_KINDS = ("radial", "tube", "two_ball")
PROBE_KINDS = ("segment", "arc", "classify")


@dataclass(eq=False)
class ProbeSpec:
    id: str
    kind: str
    point: np.ndarray
    direction: Optional[np.ndarray] = None
    x1: Optional[np.ndarray] = None
    arc_radius: float = np.nan
    epsilon: float = 0.1
    rho: float = np.nan


@dataclass(eq=False)
class Scenario:
    n: int
    background: str
    schedule_kind: str
    r0: Optional[float]
    q: Optional[float]
    i_max: Optional[int]
    radii: Optional[Tuple[float, ...]]
    rhat: Optional[Tuple[float, ...]]
    coupling_exponent: Optional[float]
    truncation: float
    tube_k: int
    centers: Optional[np.ndarray]
    params: SolverParams
    stats: dict
    probes: List[ProbeSpec]
    fit_basis: List[str]
    fit_d_min: float
    fit_d_max: float
    classify_growth: float
    classify_threshold_factor: float
    plots: Tuple[str, ...]
    cache: bool
    assertions: dict
    oracle: dict = dfield(default_factory=dict)

    def domain_count(self):
        if self.radii is not None:
            return len(self.radii)
        return (self.i_max or 0) + 1


class _Checker:
    def __init__(self):
        self.violations = []

    def error(self, path, reason):
        self.violations.append(f"{path}: {reason}")

    def get(self, table, path, key, types, default=None, required=False):
        if key not in table:
            if required:
                self.error(f"{path}.{key}", "missing required key")
            return default
        val = table[key]
        if not isinstance(val, types):
            tn = "/".join(t.__name__ for t in (types if isinstance(types, tuple) else (types,)))
            self.error(f"{path}.{key}", f"expected {tn}, got {type(val).__name__}")
            return default
        return val


def _vector(chk, table, path, key, n, required=False):
    raw = chk.get(table, path, key, list, required=required)
    if raw is None:
        return None
    if len(raw) != n or not all(isinstance(x, (int, float)) for x in raw):
        chk.error(f"{path}.{key}", f"expected a numeric vector of length {n}")
        return None
    return np.asarray(raw, dtype=float)


def parse_scenario(text):
    """Parse and validate a scenario document; raises SchemaError carrying
    every violation found."""
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise SchemaError([f"(toml): {exc}"])
    chk = _Checker()

    bg = doc.get("background", {})
    if not isinstance(bg, dict):
        chk.error("background", "expected a table")
        bg = {}
    n = chk.get(bg, "background", "n", int, required=True) or 0
    if n and n < 3:
        chk.error("background.n", "n >= 3")
    bg_kind = chk.get(bg, "background", "kind", str, default="flat")
    if bg_kind not in ("flat", "sphere_chart"):
        chk.error("background.kind", "must be 'flat' or 'sphere_chart'")

    sch = doc.get("schedule", {})
    if not isinstance(sch, dict):
        chk.error("schedule", "expected a table")
        sch = {}
    kind = chk.get(sch, "schedule", "kind", str, required=True) or "radial"
    if kind not in SCHEDULE_KINDS:
        chk.error("schedule.kind", f"must be one of {SCHEDULE_KINDS}")
    r0 = chk.get(sch, "schedule", "r0", (int, float))
    q = chk.get(sch, "schedule", "q", (int, float))
    i_max = chk.get(sch, "schedule", "i_max", int)
    radii = chk.get(sch, "schedule", "radii", list)
    rhat = chk.get(sch, "schedule", "rhat", list)
    coupling = chk.get(sch, "schedule", "coupling_exponent", (int, float))
    truncation = chk.get(sch, "schedule", "truncation", (int, float),
                         default=32.0)
    tube_k = chk.get(sch, "schedule", "tube_k", int, default=0)
    centers = None
    if radii is None and (r0 is None or q is None or i_max is None):
        chk.error("schedule", "need either radii = [...] or r0, q, i_max")
    if radii is not None:
        rl = [float(x) for x in radii]
        if any(b >= a for a, b in zip(rl, rl[1:])) or min(rl, default=1) <= 0:
            chk.error("schedule.radii",
                      "radii must be positive and strictly decreasing")
        radii = tuple(rl)
    if q is not None and not 0.0 < float(q) < 1.0:
        chk.error("schedule.q", "0 < q < 1")
    if r0 is not None and float(r0) <= 0:
        chk.error("schedule.r0", "r0 > 0")
    if float(truncation or 0) <= 0:
        chk.error("schedule.truncation", "truncation > 0")
    if kind == "tube" and n >= 3:
        lo, hi = (n - 2) / 2.0, n - 2
        if not (tube_k == int(tube_k) and lo < tube_k <= hi):
            chk.error("schedule.tube_k",
                      f"admissibility window ({lo:g} < k <= {hi:g}) violated")
    if kind == "two_ball":
        raw = chk.get(sch, "schedule", "centers", list, required=True)
        if raw is not None and n:
            if (len(raw) != 2 or any(not isinstance(c, list) or len(c) != n
                                     for c in raw)):
                chk.error("schedule.centers", f"expected two points of length {n}")
            else:
                centers = np.asarray(raw, dtype=float)
    if rhat is not None:
        rhat = tuple(float(x) for x in rhat)

    sv = doc.get("solver", {})
    if not isinstance(sv, dict):
        chk.error("solver", "expected a table")
        sv = {}
    tol = chk.get(sv, "solver", "tol", (int, float), default=1e-10)
    if float(tol) <= 0:
        chk.error("solver.tol", "tol > 0")
    grid_radial = chk.get(sv, "solver", "grid_radial", int, default=4096)
    grid_ax = chk.get(sv, "solver", "grid_axisym", list, default=[512, 512])
    if len(grid_ax) != 2 or not all(isinstance(g, int) for g in grid_ax):
        chk.error("solver.grid_axisym", "expected [nz, nrho] integers")
        grid_ax = [512, 512]
    if grid_radial < 64 or min(grid_ax) < 64:
        chk.error("solver", "grid sizes must be at least 64")
    ratio = chk.get(sv, "solver", "grading_ratio", (int, float), default=1.05)
    stretch = chk.get(sv, "solver", "grading_stretch", (int, float), default=50.0)
    max_newton = chk.get(sv, "solver", "max_newton", int, default=50)

    st = doc.get("stats", {})
    if not isinstance(st, dict):
        chk.error("stats", "expected a table")
        st = {}
    stats = {}
    for key in ("delta", "near_radius", "far_radius", "far_max"):
        val = chk.get(st, "stats", key, (int, float))
        if val is not None:
            stats[key] = float(val)
    for key in ("anchor", "near_point"):
        if key in st and n:
            vec = _vector(chk, st, "stats", key, n)
            if vec is not None:
                stats[key] = tuple(vec)
                if np.linalg.norm(vec) >= float(truncation or np.inf):
                    chk.error(f"stats.{key}", "point outside the truncation shell")

    probes = []
    for idx, pr in enumerate(doc.get("probes", [])):
        path = f"probes[{idx}]"
        if not isinstance(pr, dict):
            chk.error(path, "expected a table")
            continue
        pid = chk.get(pr, path, "id", str, default=f"probe{idx}")
        pkind = chk.get(pr, path, "kind", str, required=True) or "segment"
        if pkind not in PROBE_KINDS:
            chk.error(f"{path}.kind", f"must be one of {PROBE_KINDS}")
        point = _vector(chk, pr, path, "point", n, required=True) if n else None
        if point is not None and np.linalg.norm(point) > float(truncation or np.inf):
            chk.error(f"{path}.point", "point outside the truncation shell")
        spec = ProbeSpec(id=pid, kind=pkind,
                         point=point if point is not None else np.zeros(max(n, 1)))
        if pkind == "segment":
            d = _vector(chk, pr, path, "direction", n, required=True) if n else None
            if d is not None and np.linalg.norm(d) == 0:
                chk.error(f"{path}.direction", "zero direction")
            spec.direction = d
            spec.epsilon = float(chk.get(pr, path, "epsilon", (int, float),
                                         default=0.1))
        if pkind == "arc":
            x1 = _vector(chk, pr, path, "x1", n, required=True) if n else None
            spec.x1 = x1
            spec.arc_radius = float(chk.get(pr, path, "radius", (int, float),
                                            required=True) or np.nan)
        rho = chk.get(pr, path, "rho", (int, float))
        if pkind == "classify" and rho is None:
            chk.error(f"{path}.rho", "classification needs a ball radius")
        if rho is not None:
            if float(rho) <= 0:
                chk.error(f"{path}.rho", "rho > 0")
            spec.rho = float(rho)
        probes.append(spec)

    fit = doc.get("fit", {})
    if not isinstance(fit, dict):
        chk.error("fit", "expected a table")
        fit = {}
    basis = chk.get(fit, "fit", "basis", list, default=[])
    d_min = float(chk.get(fit, "fit", "d_min", (int, float), default=0.3))
    d_max = float(chk.get(fit, "fit", "d_max", (int, float), default=0.6))
    if d_min >= d_max:
        chk.error("fit.d_min", "need d_min < d_max")

    cls = doc.get("classify", {})
    if not isinstance(cls, dict):
        cls = {}
    growth = float(chk.get(cls, "classify", "growth", (int, float), default=1.2))
    tfactor = float(chk.get(cls, "classify", "threshold_factor", (int, float),
                            default=10.0))

    out = doc.get("output", {})
    if not isinstance(out, dict):
        out = {}
    plots = tuple(chk.get(out, "output", "plots", list, default=[]) or [])
    cache = bool(chk.get(out, "output", "cache", bool, default=True))

    assertions = doc.get("assertions", {})
    if not isinstance(assertions, dict):
        chk.error("assertions", "expected a table")
        assertions = {}

    oracle = doc.get("oracle", {})
    if not isinstance(oracle, dict):
        chk.error("oracle", "expected a table")
        oracle = {}

    if chk.violations:
        raise SchemaError(chk.violations)

    params = SolverParams(tol=float(tol), max_newton=int(max_newton),
                          grid_radial=int(grid_radial),
                          grid_axisym=(int(grid_ax[0]), int(grid_ax[1])),
                          grading_ratio=float(ratio),
                          grading_stretch=float(stretch))
    return Scenario(n=n, background=bg_kind, schedule_kind=kind,
                    r0=None if r0 is None else float(r0),
                    q=None if q is None else float(q),
                    i_max=i_max, radii=radii, rhat=rhat,
                    coupling_exponent=None if coupling is None else float(coupling),
                    truncation=float(truncation), tube_k=int(tube_k),
                    centers=centers, params=params, stats=stats,
                    probes=probes, fit_basis=list(basis),
                    fit_d_min=d_min, fit_d_max=d_max,
                    classify_growth=growth,
                    classify_threshold_factor=tfactor,
                    plots=plots, cache=cache, assertions=assertions,
                    oracle=oracle)


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
