"""Distance functions, index functions and variational source conditions for
discretized ill-posed inverse problems."""

from .distfun import DistanceProfile, brute_force_distance, distance_profile, maximize_objective
from .indexfun import IndexFunction, NonDecayingProfile, evaluate, index_from_distance
from .problems import (
    ProblemInstance,
    apply_forward,
    error_functional,
    make_autoconvolution,
    make_l1_linear,
    make_linear_hilbert,
    make_preset,
    omega,
)
from .rates import RateReport, run_rate_experiment
from .tikhonov import TikhonovSolution, solve
from .vsc import ViolationReport, verify_vsc

__version__ = "0.1.0"
