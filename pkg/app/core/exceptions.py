"""
Exception hierarchy shared by every reconstruction module.

Each exception carries the process exit code the CLI maps it to.
"""


class QPhaseError(Exception):
    """Base class for all reconstruction errors"""

    exit_code: int = 1


class ParameterError(QPhaseError):
    """Raised for invalid parameters or mismatched dimensions"""

    exit_code = 2


class SizeError(ParameterError):
    """Raised when an image is too small or too large for an operation"""

    pass


class FormatError(ParameterError):
    """Raised when a file cannot be decoded"""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class LobeNotFoundError(QPhaseError):
    """Raised when no gradient lobe stands out from the spectrum"""

    exit_code = 3


class InternalError(QPhaseError):
    """Raised when a numerical invariant is broken"""

    pass
