class FreeConvError(Exception):
    pass


class InvalidParameter(FreeConvError, ValueError):
    pass


class NonPositiveImaginaryPart(FreeConvError, ValueError):

    def __init__(self, value):
        self.value = value
        super().__init__(f"spectral parameter must lie in the upper half-plane: got {value!r}")


class UnsupportedOrder(FreeConvError, ValueError):
    pass


class ParseError(FreeConvError):
    pass


class SolverFailure(FreeConvError):

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class MaxIterationsExceeded(SolverFailure):
    pass


class SingularJacobian(SolverFailure):
    pass


class DomainEscape(SolverFailure):
    pass


class RankDeficiency(FreeConvError):
    pass


class EigensolverFailure(FreeConvError):
    pass
