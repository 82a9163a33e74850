"""Mini-batch stochastic Nesterov smoothing for ball-constrained convex composite problems."""
from .core import BallSet, ProxSetup, Schedule, euclidean_prox, generalized_projected_gradient, project, prox_step, schedule_at
from .estimator import MSNSClassifier, derive_parameters
from .exceptions import ConfigError, DataError, MSNSError, SolverError
from .smoothing import SmoothingParams, StructureConstants, select_parameters
from .solver import OracleBatch, RunReport, TraceRow, duality_gap, dual_value, msns_run
from .baselines import mmdsa_run, rspg_run

__version__ = "0.1.0"
