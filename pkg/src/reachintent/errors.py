"""Exception types raised across the library."""


class ReachIntentError(Exception):
    """Base class for all library errors."""


class ModelError(ReachIntentError):
    """Invalid kinematic model parameters."""


class JointLimitError(ReachIntentError):
    """Joint configuration outside the model's limits."""


class SingularityError(ReachIntentError):
    """Undamped pseudo-inverse requested at a rank-deficient Jacobian."""


class UnreachableTargetError(ReachIntentError):
    """Reach target outside the workspace or beyond arm span."""


class ParameterError(ReachIntentError):
    """Invalid distribution or configuration parameters."""


class InsufficientDataError(ReachIntentError):
    """Not enough observations to build an estimate."""


class AlignmentError(ReachIntentError):
    """Trajectories sampled at different rates cannot be compared."""


class StaleCacheError(ReachIntentError):
    """Grid trajectory cache was built by a different generator."""


class DataFormatError(ReachIntentError):
    """Malformed dataset, weights, or posterior file."""


class TrainingError(ReachIntentError):
    """Surrogate training diverged."""


class TaskError(ReachIntentError):
    """Invalid task log or simulation state."""
