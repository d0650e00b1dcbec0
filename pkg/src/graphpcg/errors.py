class ConfigurationError(ValueError):
    """A graph configuration cannot be realised (size, counts or feasibility)."""


class ConstraintParseError(ValueError):
    """A constraint file is malformed or references undeclared types."""


class CompositionError(ValueError):
    """A junction rule cannot be applied to the given graphs."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or was set up inconsistently."""
