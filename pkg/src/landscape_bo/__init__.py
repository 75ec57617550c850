"""Per-run acquisition-function schedule selection for GP-based Bayesian optimisation.

BBOB problems, Latin hypercube designs, a Matern-5/2 GP surrogate, EI/PI
schedules, 38 ELA features of the initial design and a multi-output random
forest that maps those features to the best schedule.
"""

from .acquisition import SCHEDULE_IDS, AfKind, Schedule, get_schedule, portfolio
from .bbob import Problem, evaluate, evaluate_batch, instantiate
from .doe import Design, sample_design
from .ela import FEATURE_NAMES, FeatureVector, feature_vector
from .engine import BudgetConfig, RunRecord, run
from .gp import GpConfig, GpModel, SurrogateError, fit
from .selector import Forest, ForestConfig, build_dataset, select, train_forest

__version__ = "0.1.0"

__all__ = [
    "SCHEDULE_IDS", "AfKind", "Schedule", "get_schedule", "portfolio",
    "Problem", "evaluate", "evaluate_batch", "instantiate",
    "Design", "sample_design",
    "FEATURE_NAMES", "FeatureVector", "feature_vector",
    "BudgetConfig", "RunRecord", "run",
    "GpConfig", "GpModel", "SurrogateError", "fit",
    "Forest", "ForestConfig", "build_dataset", "select", "train_forest",
]
