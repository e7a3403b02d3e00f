"""Exact moment analysis of linear TD learning viewed as a Markov jump linear system."""

from .chain import MarkovChain, evolve_distribution, stationary_distribution
from .errors import (AnalysisError, ConfigError, InstabilityError, ModelWarning,
                     NonErgodicError, NumericalError, SizeError, TDMJLSError,
                     ValidationError)
from .mjls import (AugmentedLTI, JumpLinearSystem, MomentState,
                   augmented_trajectory, build_augmented_lti, initial_moments,
                   mean_square_norm, moment_recursion_step)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError", "AugmentedLTI", "ConfigError", "InstabilityError",
    "JumpLinearSystem", "MarkovChain", "ModelWarning", "MomentState",
    "NonErgodicError", "NumericalError", "SizeError", "TDMJLSError",
    "ValidationError", "augmented_trajectory", "build_augmented_lti",
    "evolve_distribution", "initial_moments", "mean_square_norm",
    "moment_recursion_step", "stationary_distribution",
]
