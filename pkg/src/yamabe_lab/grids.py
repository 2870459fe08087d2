"""One-dimensional node generators for the structured solvers.

Grids are graded geometrically toward excised boundaries (cells grow by a
fixed ratio away from the boundary until the total stretch cap is reached,
uniform beyond).  Dyadic refinement bisects every cell, so refined grids nest
exactly and refinement studies compare solutions at shared nodes.
"""

import numpy as np

DEFAULT_RATIO = 1.05
DEFAULT_STRETCH = 50.0


def graded_nodes(a, b, num_cells, grade_lo=False, grade_hi=False,
                 ratio=DEFAULT_RATIO, stretch=DEFAULT_STRETCH):
    """Nodes of a graded mesh on [a, b] with num_cells cells.

    grade_lo/grade_hi cluster cells toward the respective end; cell sizes
    ramp geometrically by `ratio` until they reach `stretch` times the first
    cell, then stay uniform.
    """
    if b <= a:
        raise ValueError("need b > a")
    n = int(num_cells)
    if n < 4:
        raise ValueError("need at least 4 cells")
    if ratio <= 1.0 or stretch < 1.0:
        raise ValueError("ratio must exceed 1 and stretch must be >= 1")
    j = np.arange(n, dtype=float)
    w = np.full(n, stretch)
    if grade_lo:
        w = np.minimum(w, np.minimum(ratio ** j, stretch))
    if grade_hi:
        w = np.minimum(w, np.minimum(ratio ** j[::-1], stretch))
    if not (grade_lo or grade_hi):
        w = np.ones(n)
    x = np.concatenate([[0.0], np.cumsum(w)])
    x /= x[-1]
    return a + (b - a) * x


def log_nodes(a, b, num_cells):
    """Geometric (log-uniform) nodes on [a, b], a > 0."""
    if a <= 0 or b <= a:
        raise ValueError("need 0 < a < b")
    return a * (b / a) ** (np.arange(int(num_cells) + 1) / float(num_cells))


def refine(nodes):
    """Bisect every cell; the coarse nodes are a subset of the fine ones."""
    nodes = np.asarray(nodes, dtype=float)
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    out = np.empty(2 * len(nodes) - 1)
    out[0::2] = nodes
    out[1::2] = mids
    return out


def snap_nodes(nodes, points):
    """Move the nearest interior node onto each requested coordinate.

    Keeps the node count; raises if a snap would break strict monotonicity
    (requested points too close together for this resolution).
    """
    nodes = np.array(nodes, dtype=float)
    for p in points:
        p = float(p)
        if not nodes[0] < p < nodes[-1]:
            continue
        idx = int(np.argmin(np.abs(nodes - p)))
        idx = min(max(idx, 1), len(nodes) - 2)
        nodes[idx] = p
    if np.any(np.diff(nodes) <= 0.0):
        raise ValueError("node snapping produced a non-monotone grid")
    return nodes
