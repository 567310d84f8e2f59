"""Solvers for mathematical programs with complementarity constraints."""

from .errors import (AssemblyError, BoundsError, ComplementarityInfeasible,
                     EnumerationCapExceeded, EvaluatorError, MpccError,
                     OptionError, ParseError)
from .ipm import (Filter, Iterate, TerminationReport, check_termination,
                  fraction_to_boundary)
from .model import (IndexSets, MpccMultipliers, MpccProblem, StandardProblem,
                    classify_stationarity, index_sets, mpcc_kkt_residual,
                    to_standard_form)
from .penalty import PenaltySolver, penalty_kkt_residual, solve_penalty
from .relax import (HomotopyState, RelaxationSolver, relaxed_kkt_residual,
                    solve_relaxation)
from .result import SolveResult

__version__ = "0.1.0"

__all__ = [
    "MpccProblem", "StandardProblem", "IndexSets", "MpccMultipliers",
    "to_standard_form", "index_sets", "classify_stationarity",
    "mpcc_kkt_residual", "RelaxationSolver", "solve_relaxation",
    "relaxed_kkt_residual", "PenaltySolver", "solve_penalty",
    "penalty_kkt_residual", "SolveResult", "TerminationReport", "Iterate",
    "Filter", "check_termination", "fraction_to_boundary", "HomotopyState",
    "MpccError", "BoundsError", "ComplementarityInfeasible", "AssemblyError",
    "EvaluatorError", "OptionError", "ParseError", "EnumerationCapExceeded",
    "__version__",
]
