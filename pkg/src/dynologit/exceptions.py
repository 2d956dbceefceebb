"""Exception hierarchy shared across the package."""


class DynologitError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(DynologitError, ValueError):
    pass


class EmptyDatasetError(DynologitError, ValueError):
    pass


class DataError(DynologitError, ValueError):
    """Malformed or inconsistent input data."""


class EstimationError(DynologitError, RuntimeError):
    """Base class for failures inside an estimator."""


class NoInformationError(EstimationError):
    """No observation carries likelihood information (e.g. no switchers)."""


class SingularHessianError(EstimationError):
    def __init__(self, message, slots=()):
        super().__init__(message)
        self.slots = tuple(slots)


class SeparationError(EstimationError):
    """Parameter norm diverged, which signals (quasi-)separation."""


class UnreliableBootstrapError(EstimationError):
    pass


class AssumptionViolationError(EstimationError):
    """Design moment needed for constructive identification is singular."""


class ZeroProbabilityEventError(DynologitError, ValueError):
    pass
