"""
Exceptions raised by PythonDDRO.

Every data problem is a ValueError so callers can catch it the usual way.
"""

class DDROError(ValueError):
    """ Base class for all PythonDDRO errors """

class NegativeMass(DDROError):
    pass

class NotNormalized(DDROError):
    pass

class DimensionMismatch(DDROError):
    pass

class NonPositiveReference(DDROError):
    pass

class NonPositiveRadius(DDROError):
    pass

class ProbabilityLevelOutOfRange(DDROError):
    pass

class CountOutOfRange(DDROError):
    pass

class TooLarge(DDROError):
    pass

class NonPositiveLambda(DDROError):
    pass

class OverflowGuard(DDROError):
    """ An exponent argument passed the guard; the iterate is diverging """

class NotConverged(DDROError):
    def __init__(self, message, report):
        super().__init__(message)

        self.report = report

class ModelGradientMismatch(DDROError):
    pass

class InfeasibleParam(DDROError):
    pass

class SingularSystem(DDROError):
    pass

class GraphFormatError(DDROError):
    pass

class ValidationException(DDROError):
    def __init__(self, message, errors):
        super().__init__(message)

        self.errors = errors

class ValidationError:
    def __init__(self, field, value, error):
        self.field = field
        self.value = value
        self.error = error

    def __str__(self):
        return f"{self.field}: {self.error} (got {self.value!r})"
