"""Exception types mapped to CLI exit codes (see dofnet.cli)."""


class DataFormatError(ValueError):
    """A dataset file (IDX, CIFAR binary, CSV) violates its format contract."""


class TrainingError(RuntimeError):
    """Training produced non-finite parameters, activations, or loss."""


class EstimationError(RuntimeError):
    """A degrees-of-freedom estimate could not be completed."""
