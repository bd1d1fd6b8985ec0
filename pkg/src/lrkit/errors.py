"""Exception hierarchy shared by all lrkit modules."""


class LRKitError(Exception):
    """Base class for every error raised by lrkit."""


class InvalidInputError(LRKitError, ValueError):
    """Malformed arguments: bad knots, wrong dimension, out-of-range values."""


class NotAKnotError(InvalidInputError):
    pass


class NotNestedError(InvalidInputError):
    """Fine knot vector does not contain the coarse one."""


class IndependenceWarning(UserWarning):
    """Refinement outside the degree range where independence is known."""


class NoSplitError(LRKitError):
    """A meshrectangle insertion that splits no B-spline."""


class MalformedMeshError(LRKitError):
    pass


class FixpointError(LRKitError):
    """Semi-standard T-spline refinement did not settle."""


class OutOfDomainError(InvalidInputError):
    pass


class InconsistencyError(LRKitError):
    """A collection member does not fit the partition it is extracted on."""


class FormatError(LRKitError):
    """Base class for serialization failures."""


class ParseError(FormatError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(FormatError):
    def __init__(self, message, record=None):
        self.record = record
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)
