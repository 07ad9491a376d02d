"""Exception hierarchy shared across the package."""


class QLayoutError(Exception):
    """Base class for all package errors."""


class ParseError(QLayoutError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedGateError(ParseError):
    def __init__(self, gate, line=None):
        super().__init__(f"unsupported gate '{gate}'", line=line)
        self.gate = gate


class EmptyCircuitError(QLayoutError):
    pass


class TopologyError(QLayoutError):
    pass


class ShapeError(QLayoutError):
    def __init__(self, message, *shapes):
        if shapes:
            message = f"{message}: {' vs '.join(str(s) for s in shapes)}"
        super().__init__(message)


class IncompleteLayoutError(QLayoutError):
    pass


class ConstraintViolationError(QLayoutError):
    pass


class SearchSpaceTooLargeError(QLayoutError):
    pass


class NumericError(QLayoutError):
    pass


class InfeasibleStateError(QLayoutError):
    pass


class ConfigError(QLayoutError):
    pass
