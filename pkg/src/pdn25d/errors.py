"""Exception types raised across the toolkit."""


class PdnError(Exception):
    """Base class for all toolkit errors."""


class InvalidFloorplanError(PdnError):
    pass


class LayoutViolationError(PdnError):
    pass


class SingularSystemError(PdnError):
    """The MNA matrix is singular, usually because a node floats."""

    def __init__(self, message: str, node: int | None = None, frequency: float | None = None):
        super().__init__(message)
        self.node = node
        self.frequency = frequency


class DivergenceError(PdnError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class NumericFaultError(PdnError):
    pass


class CaseFileError(PdnError):
    """Schema or value problem in a case file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PreconditionError(PdnError):
    pass
