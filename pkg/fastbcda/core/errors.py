"""Exception hierarchy for solver, instance and benchmark failures."""

from typing import Optional


class FastBCDAError(Exception):
    """Base exception for all library errors."""

    code: str = "fastbcda_error"

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class DimensionError(FastBCDAError, ValueError):
    """Raised on shape mismatches, bad indices or duplicate block indices."""

    code = "dimension_mismatch"


class InvalidParameterError(FastBCDAError, ValueError):
    """Raised when a scalar parameter is outside its admissible range."""

    code = "invalid_parameter"


class AssumptionViolationError(FastBCDAError):
    """Raised when a block Hessian is not positive definite."""

    code = "assumption_violation"


class InstanceFormatError(FastBCDAError):
    """
    Raised when an instance file cannot be decoded.

    The ``code`` attribute is one of ``bad_magic``, ``bad_header``,
    ``size_mismatch`` or ``checksum_mismatch``.
    """

    code = "bad_header"


class ConvergenceError(FastBCDAError):
    """Raised when an inner iterative procedure fails to converge."""

    code = "no_convergence"


class MissingGroundTruthError(FastBCDAError):
    """Raised when an error trace is requested without x_true."""

    code = "missing_ground_truth"


class BenchmarkError(FastBCDAError):
    """Raised on empty or malformed benchmark results."""

    code = "bad_results"
