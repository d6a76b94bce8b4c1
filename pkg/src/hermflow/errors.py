class SingularMetric(ValueError):
    """A metric field failed the pointwise positive-definiteness test."""

    def __init__(self, msg, point=None, eigenvalue=None):
        super().__init__(msg)
        self.point = point
        self.eigenvalue = eigenvalue


class NotAdmissible(SingularMetric):
    """ghat + i ddbar(phi) is not positive definite somewhere."""


class StepRejected(RuntimeError):
    pass


class NonFinite(FloatingPointError):
    pass


class Stalled(RuntimeError):
    pass


class NoConvergence(RuntimeError):
    pass


class InadmissibleConstruction(ValueError):
    def __init__(self, msg, margin=None):
        super().__init__(msg)
        self.margin = margin


class PreconditionError(ValueError):
    pass
