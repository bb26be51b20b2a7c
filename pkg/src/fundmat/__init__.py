"""Fundamental matrix estimation: eight-point and certified global (moment relaxation) methods,
with a projective bundle-adjustment evaluation and a synthetic-scene simulator."""
from .epipolar import FMatrix, Matches, PointMatch, algebraic_cost, eight_point, global_f
from .errors import DegenerateDataError, SolverFailure
from .lasserre import SemiAlgebraicProblem, solve_relaxation
from .multiview import assess, canonical_cameras, evaluate
from .polyopt import MomentVector, Polynomial
from .sdp import SdpProblem, SolverStatus, solve_sdp
from .simulator import SceneConfig, motion, run_sweep, synthesize

__version__ = "0.1.0"

__all__ = [
    "FMatrix", "Matches", "PointMatch", "algebraic_cost", "eight_point", "global_f",
    "DegenerateDataError", "SolverFailure", "SemiAlgebraicProblem", "solve_relaxation",
    "assess", "canonical_cameras", "evaluate", "MomentVector", "Polynomial",
    "SdpProblem", "SolverStatus", "solve_sdp", "SceneConfig", "motion", "run_sweep",
    "synthesize",
]
