"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(ValueError):
    """An elementwise operation left its domain (log of <= 0, division by 0).

    ``index`` is the multi-index of the first offending element.
    """

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} at index {index}")
        self.index = index


class GraphReuseError(RuntimeError):
    """``backward`` was called on a graph whose buffers were already consumed."""


class DegenerateInputError(ValueError):
    """Input is rank deficient (or otherwise degenerate) within tolerance."""


class InvalidRotationError(ValueError):
    """Matrix is not a proper rotation within the validity tolerance."""


class NumericalError(ArithmeticError):
    """Training diverged (NaN/inf loss)."""


class FormatError(ValueError):
    """A file did not match its binary format.

    ``code`` is a short machine-readable tag such as ``"bad-magic"``,
    ``"truncated"``, ``"count-mismatch"``, ``"corrupt-header"`` or
    ``"unsupported-version"``.
    """

    def __init__(self, code, message=""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
