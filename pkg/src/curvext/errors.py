"""Exception types shared across the toolkit."""

from __future__ import annotations


class CurvextError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CurvextError, ValueError):
    """Invalid run configuration or exponent pair."""


class DomainError(CurvextError, ValueError):
    """An operation was called outside its mathematical domain."""


class SingularTorsionError(DomainError):
    """The torsion matrix at a basepoint is numerically singular."""

    def __init__(self, a: float, det: float, threshold: float):
        self.a = a
        self.det = det
        self.threshold = threshold
        super().__init__(
            f"torsion matrix is singular at a={a!r} "
            f"(|det|={abs(det):.3e} < threshold {threshold:.3e})"
        )


class ResourceError(CurvextError, RuntimeError):
    """A computation would exceed its configured work budget."""


class NonFiniteError(CurvextError, ValueError):
    """A result contained NaN or infinite values."""

    def __init__(self, producer: str, detail: str = ""):
        self.producer = producer
        msg = f"non-finite values produced by {producer}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
