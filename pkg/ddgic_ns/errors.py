"""
Exception hierarchy for ddgic-ns.
"""

from typing import Any, Optional


class DDGICError(Exception):
    """Base class for every error raised by the solver library."""


class MeshError(DDGICError):
    """Raised when a mesh cannot be loaded or indexed."""


class MeshParseError(MeshError):
    """Malformed mesh file."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        where = ''
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ': '
        super().__init__(f"{where}{message}")
        self.path = path
        self.line = line


class MeshTopologyError(MeshError):
    """Edge shared by more than two cells, inverted or otherwise invalid cells."""


class DegenerateCellError(MeshTopologyError):
    """Triangle with zero area."""


class MeshTaggingError(MeshError):
    """Untagged boundary edge or inconsistent boundary tag table."""


class PeriodicMatchError(MeshTaggingError):
    """A periodic edge has no, or more than one, translated counterpart."""


class InadmissibleStateError(DDGICError):
    """Nonpositive density or internal energy."""

    def __init__(self, message: str, cell: Optional[int] = None, point: Optional[int] = None,
                 variable: Optional[str] = None, stage: Optional[int] = None):
        self.base_message = message
        self.cell = cell
        self.point = point
        self.variable = variable
        self.stage = stage
        details = []
        if stage is not None:
            details.append(f"stage {stage}")
        if cell is not None:
            details.append(f"cell {cell}")
        if point is not None:
            details.append(f"point {point}")
        if variable is not None:
            details.append(f"variable {variable}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)

    def with_stage(self, stage: int) -> 'InadmissibleStateError':
        return InadmissibleStateError(self.base_message, self.cell, self.point, self.variable, stage)


class SolverBlowUpError(DDGICError):
    """Time integration produced NaN or inadmissible values."""

    def __init__(self, message: str, step: int, last_good: Any = None):
        super().__init__(f"{message} (step {step})")
        self.step = step
        self.last_good = last_good


class CompatibilityError(DDGICError):
    """Requested antiderivative matrix does not exist."""


class ConfigError(DDGICError):
    """Invalid case configuration."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        context = []
        if key is not None:
            context.append(f"key '{key}'")
        if line is not None:
            context.append(f"line {line}")
        if context:
            message = f"{message} [{', '.join(context)}]"
        super().__init__(message)
        self.key = key
        self.line = line


class DiagnosticsError(DDGICError):
    """Post-processing could not produce the requested quantity."""


class ExportError(DDGICError):
    """Output file could not be written or read back."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
