"""Exception hierarchy shared by the solver, diagnostics and CLI."""


class LFDError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(LFDError, ValueError):
    pass


class NotAdmissible(LFDError, ValueError):
    """Requested moments violate the Fermi-Dirac admissibility condition."""


class NoConvergence(LFDError, RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularKernel(LFDError, ValueError):
    pass


class BackendMismatch(LFDError, AssertionError):
    pass


class FieldGridMismatch(LFDError, ValueError):
    pass


class BoundViolation(LFDError, RuntimeError):
    def __init__(self, message, fmin=None, fmax=None):
        super().__init__(message)
        self.fmin = fmin
        self.fmax = fmax


class EpsilonMismatch(LFDError, ValueError):
    pass


class WindowNotCovered(LFDError, ValueError):
    pass


class WeightOverflow(LFDError, OverflowError):
    pass


class DegenerateDistribution(LFDError, ValueError):
    pass


class NormalizationViolated(LFDError, ValueError):
    pass


class ParameterOutOfRange(LFDError, ValueError):
    pass


class Saturated(LFDError, ValueError):
    """kappa_0 = 1 - eps * max f is not positive."""


class ParseError(LFDError, ValueError):
    pass


class ValidationError(LFDError, ValueError):
    def __init__(self, key, message=""):
        super().__init__(f"{key}: {message}" if message else key)
        self.key = key


class CheckpointCorrupt(LFDError, IOError):
    pass


class MomentCorrectionFailed(LFDError, RuntimeError):
    pass
