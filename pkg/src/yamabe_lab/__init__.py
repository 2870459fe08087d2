"""yamabe-lab: a numerical laboratory for complete conformal metrics of
constant negative scalar curvature on excised domains, their Ricci
curvature, and blow-up phenomena across domain exhaustions."""

__version__ = "0.1.0"

from .conformal import (Background, FLAT, SPHERE_CHART, Jet2, RicciReport,
                        conformal_ricci, conformal_scalar, ricci_nn_solved,
                        v_jet_from_u_jet)
from .domain import (BallExclusion, DomainSpec, SolverParams, TubeExclusion)
from .oracles import (OracleSpec, exterior_ball, green_pole, half_space,
                      multipole, oracle_residual, oracle_u, oracle_u_jet,
                      oracle_v, oracle_v_jet, poincare_ball, tube_complement,
                      two_ball_super)
from .radial import monotone_bracket, residual_norm, solve_radial
from .axisym import solve_axisymmetric, solve_axisymmetric_bracket
from .exhaustion import (ExhaustionSchedule, ExhaustionRun, StatsConfig,
                         build_schedule, normalization_slope,
                         rescale_and_fit, run_exhaustion,
                         self_similarity_violation)
from .fields import SampledField, jet2, ricci_grid, ricci_profile
from .probes import (arc_probe, classify, pinch_condition, segment_probe,
                     BLOWUP, BOUNDED, INCONCLUSIVE)
from .sphere import chart, lift, project, psi
from .scenario import parse_scenario, load_scenario
