"""Domain descriptions (background + excised regions + truncation) and
solver parameters."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .conformal import Background
from .errors import InvalidTube, OverlappingExclusions

RADIAL = "radial"
AXISYMMETRIC = "axisymmetric"
SLAB_SYMMETRY = "slab"


@dataclass(frozen=True, eq=False)
class BallExclusion:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class TubeExclusion:
    """Solid tube of the given radius around the k-dimensional coordinate
    plane spanned by the first k axes."""

    k: int
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("tube radius must be positive")


def check_tube_k(n, k):
    if k != int(k) or not ((n - 2) / 2.0 < k <= n - 2):
        raise InvalidTube(
            f"tube dimension k={k} outside the solvable window "
            f"((n-2)/2, n-2] = ({(n - 2) / 2.0}, {n - 2}] for n={n}")


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Background geometry with excised regions and an outer truncation.

    shell_is_boundary marks the truncation shell as a genuine zero set of v
    (interior-ball domains, sphere transfers) rather than a cut of an
    unbounded domain carrying closed-form Dirichlet data.
    """

    background: Background
    exclusions: Tuple
    truncation_radius: Optional[float]
    shell_is_boundary: bool = False
    symmetry: str = RADIAL

    def __post_init__(self):
        object.__setattr__(self, "exclusions", tuple(self.exclusions))
        self.validate()

    @property
    def n(self):
        return self.background.n

    def validate(self):
        n = self.n
        balls = [e for e in self.exclusions if isinstance(e, BallExclusion)]
        tubes = [e for e in self.exclusions if isinstance(e, TubeExclusion)]
        for t in tubes:
            check_tube_k(n, t.k)
        if tubes and balls:
            raise OverlappingExclusions("tube and ball exclusions cannot mix")
        if len(tubes) > 1:
            raise OverlappingExclusions("at most one tube exclusion")
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                gap = (np.linalg.norm(balls[i].center - balls[j].center)
                       - balls[i].radius - balls[j].radius)
                if gap <= 0:
                    raise OverlappingExclusions(
                        f"balls {i} and {j} overlap or touch (gap {gap:.3g})")
        if self.truncation_radius is not None:
            for b in balls:
                if np.linalg.norm(b.center) + b.radius >= self.truncation_radius:
                    raise OverlappingExclusions(
                        "ball exclusion not strictly inside the truncation shell")
        if self.symmetry == RADIAL:
            if len(self.exclusions) > 1:
                raise ValueError("radial symmetry admits at most one exclusion")
            if balls and np.linalg.norm(balls[0].center) > 0:
                raise ValueError("radial symmetry needs the ball at the origin")
            if not self.exclusions and not self.shell_is_boundary:
                raise ValueError("empty exclusion list needs a boundary shell")
        if self.symmetry == AXISYMMETRIC:
            if len(balls) < 1:
                raise ValueError("axisymmetric domains need ball exclusions")
            if len(balls) >= 2:
                axis = balls[1].center - balls[0].center
                axis = axis / np.linalg.norm(axis)
                for b in balls[2:]:
                    d = b.center - balls[0].center
                    off = d - (d @ axis) * axis
                    if np.linalg.norm(off) > 1e-12:
                        raise ValueError("ball centers must be collinear")


@dataclass(frozen=True)
class SolverParams:
    """Newton solve configuration (defaults match the laboratory contract)."""

    tol: float = 1e-10
    max_newton: int = 50
    max_halvings: int = 30
    grid_radial: int = 4096
    grid_axisym: Tuple[int, int] = (512, 512)
    grading_ratio: float = 1.05
    grading_stretch: float = 50.0
    linear_rtol: float = 1e-12

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.grid_radial < 64 or min(self.grid_axisym) < 64:
            raise ValueError("grid sizes must be at least 64")
