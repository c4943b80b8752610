"""Exception types raised across the package."""


class CascadeError(Exception):
    """Base class for all package errors."""


# fields
class RadiusExceeded(CascadeError):
    pass


class TruncationNotConverged(CascadeError):
    pass


# lattice sets
class NonIntegerChildren(CascadeError):
    pass


class DegenerateRectangle(CascadeError):
    pass


class ConstructionFailed(CascadeError):
    def __init__(self, msg, blocking=None):
        super().__init__(msg)
        self.blocking = blocking


# spectra / normal form
class ZeroMode(CascadeError):
    pass


class MomentumViolation(CascadeError):
    pass


class ZeroDivisor(CascadeError):
    pass


class SupportMismatch(CascadeError):
    pass


# integrators
class StepFailure(CascadeError):
    pass


class SearchFailed(CascadeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


# reduction / hydro
class VacuumAtZeroMode(CascadeError):
    pass


class MassMismatch(CascadeError):
    pass


class VacuumDetected(CascadeError):
    pass


class HypothesisViolated(CascadeError):
    def __init__(self, msg, slack=None):
        super().__init__(msg)
        self.slack = slack


class CutoffOverflow(CascadeError):
    pass


# cli
class ConfigError(CascadeError):
    pass


class ExperimentFailed(CascadeError):
    def __init__(self, msg, failed=()):
        super().__init__(msg)
        self.failed = list(failed)
