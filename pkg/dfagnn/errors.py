class DfaGnnError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(DfaGnnError, ValueError):
    """Operand dimensions do not fit together."""


class GraphError(DfaGnnError, ValueError):
    """Invalid edge list or perturbation request."""


class DatasetFormatError(DfaGnnError, ValueError):
    """A dataset directory does not follow the documented text format."""


class ConfigError(DfaGnnError, ValueError):
    """Experiment or training configuration is invalid."""


class TrainingDivergedError(DfaGnnError, RuntimeError):
    """Weights became non-finite during training."""
