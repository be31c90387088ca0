"""
Exception hierarchy shared by the pipeline.

Each class carries the CLI exit code it maps to; only core.py turns them into
process exit codes.
"""

from typing import Optional

from .constants import (
    EXIT_VALIDATION, EXIT_IO_PARSE, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_DIVERGENCE
)


class SynthesisToolError(Exception):
    exit_code = EXIT_SOLVER


class SystemParseError(SynthesisToolError):
    exit_code = EXIT_IO_PARSE

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class UnknownFieldError(SystemParseError):
    pass


class DimensionMismatchError(SystemParseError):
    pass


class MembershipGrammarError(SystemParseError):
    def __init__(self, message: str, expression: str, position: int):
        self.expression = expression
        self.position = position
        super().__init__(f"{message} at position {position} in '{expression}'")


class InvalidMembershipError(SynthesisToolError):
    exit_code = EXIT_VALIDATION


class ValidationFailedError(SynthesisToolError):
    exit_code = EXIT_VALIDATION

    def __init__(self, report):
        self.report = report
        super().__init__(f"system failed validation ({len(report.violations)} violation(s))")


class InvalidOptionError(SynthesisToolError):
    exit_code = EXIT_IO_PARSE


class LayoutInfeasibleError(SynthesisToolError):
    exit_code = EXIT_INFEASIBLE


class InfeasibleError(SynthesisToolError):
    exit_code = EXIT_INFEASIBLE

    def __init__(self, message: str, configuration: Optional[dict] = None):
        self.configuration = configuration or {}
        super().__init__(f"{message}; configuration: {self.configuration}")


class SolverError(SynthesisToolError):
    exit_code = EXIT_SOLVER

    def __init__(self, message: str, status: str = "NumericalTrouble"):
        self.status = status
        super().__init__(message)


class IndefiniteMatrixError(SynthesisToolError):
    exit_code = EXIT_SOLVER


class SimConfigError(SynthesisToolError):
    exit_code = EXIT_IO_PARSE


class SimulationDivergenceError(SynthesisToolError):
    exit_code = EXIT_DIVERGENCE

    def __init__(self, message: str, trajectory=None):
        self.trajectory = trajectory
        super().__init__(message)


class JacobiConvergenceError(SynthesisToolError):
    exit_code = EXIT_SOLVER
