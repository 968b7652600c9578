"""
Error types shared by every app.

Management commands map these onto exit codes, see
experiments.management.commands._base.
"""

from typing import Optional


class TdmpcError(Exception):
    """Base class for all errors raised by the lab."""


class ModelConstructionError(TdmpcError, ValueError):
    """Matrices with inconsistent shapes, bad weights or a bad horizon."""


class CertificateError(TdmpcError):
    """
    A certificate cannot be issued for the given design.

    Args:
        message: What failed
        residual: Final residual of an iterative computation, if any
        hint: Remediation shown to CLI users
    """

    def __init__(self, message: str, residual: Optional[float] = None, hint: str = ''):
        super().__init__(message)
        self.residual = residual
        self.hint = hint

    def __str__(self):
        text = super().__str__()
        if self.residual is not None:
            text += f" (residual {self.residual:.3e})"
        if self.hint:
            text += f" - {self.hint}"
        return text


class SolverError(TdmpcError):
    """The PGM oracle hit its iteration cap."""

    def __init__(self, message: str, residual: Optional[float] = None, step: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.step = step

    def __str__(self):
        text = super().__str__()
        if self.step is not None:
            text = f"step {self.step}: {text}"
        if self.residual is not None:
            text += f" (residual {self.residual:.3e})"
        return text


class OracleError(TdmpcError):
    """The active-set enumeration refused the instance or found no KKT point."""


class ScheduleError(TdmpcError, ValueError):
    """A Dim-SuMPC schedule violates its ordering or budget invariants."""


class ScenarioMismatchError(TdmpcError, ValueError):
    """Two trajectories or configs that must share a scenario do not."""


class NumericalError(TdmpcError):
    """A numerical computation produced a non-finite or ill-conditioned result."""


class ConfigError(TdmpcError, ValueError):
    """
    A scenario config failed validation.

    Args:
        message: Summary line
        errors: Mapping of field name to the list of violated constraints
    """

    def __init__(self, message: str, errors: Optional[dict] = None):
        super().__init__(message)
        self.errors = errors or {}

    def __str__(self):
        text = super().__str__()
        for name, problems in self.errors.items():
            text += f"\n  {name}: {'; '.join(str(p) for p in problems)}"
        return text
