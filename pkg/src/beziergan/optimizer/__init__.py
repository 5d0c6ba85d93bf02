from .acquisition import N_CANDIDATES, expected_improvement, propose_next, sobol_candidates
from .ego import ego_run, initial_design
from .ga import ga_run
from .gp import GaussianProcess, GPError, gp_fit, robust_cholesky
from .gpc import GPClassifier, gpc_fit
from .trace import History, Record, evaluate_safely
from .tso import Budget, NoFeasibleDesign, TsoResult, tso_run
