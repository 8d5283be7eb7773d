from __future__ import annotations

from typing import Any


class MTSAError(Exception):
    """General error raised for all problems in operation of the pipeline."""

    def __init__(self, text: str | None = None, **context: Any):
        """Creates an MTSAError.

        Args:
            text (Optional[str]): Message for the error.
            **context: Structured details (line, column, statement index,
                constraint id, ...) rendered after the message.
        """
        self.text = text
        self.context = {key: val for key, val in context.items() if val is not None}
        super().__init__(text)

    def __getattr__(self, name: str) -> Any:
        # only reached for attributes missing on the instance
        context = self.__dict__.get("context", {})
        if name in context:
            return context[name]
        raise AttributeError(name)

    def __str__(self) -> str:
        t = f"{type(self).__name__}"
        if self.text:
            t += f": {self.text}"
        details = "".join(
            f"\n\t{key} = {val}" for key, val in sorted(self.context.items())
        )
        return t + details


# Data and calendar errors


class OutOfRange(MTSAError):
    """Raised when a time index falls outside the calendar range."""


class ParseError(MTSAError):
    """Raised on a malformed CSV row."""


class DuplicateKey(MTSAError):
    """Raised when a CSV repeats a time key."""


# Dialect errors


class DialectError(MTSAError):
    """Base class for lexing and parsing errors in ``.mtsa`` scripts."""


class LexError(DialectError):
    """Raised on an illegal character or an unterminated string literal."""


class ScriptSyntaxError(DialectError):
    """Raised when a script does not follow the grammar."""


class UnknownKeyword(DialectError):
    """Raised when a statement or type starts with a word the dialect does not know."""


# Compilation and grounding errors


class CompileError(MTSAError):
    """Base class for errors lowering a CREATE EVENT into an estimation problem."""


class UnresolvedReference(CompileError):
    pass


class NonLinearObjective(CompileError):
    pass


class UnsupportedGuardShape(CompileError):
    pass


class UnsupportedConstraintShape(CompileError):
    pass


class GroundingError(MTSAError):
    """Base class for errors expanding a problem against loaded data."""


class MissingSeries(GroundingError):
    pass


class CalendarGap(GroundingError):
    pass


class BadBigM(MTSAError):
    """Raised when the big-M constant is smaller than the largest demand."""


# Solver errors


class SolverError(MTSAError):
    """Base class for errors raised by the solvers."""


class DimensionMismatch(SolverError):
    pass


class NonzeroBudget(SolverError):
    pass


class ComboLimitExceeded(SolverError):
    pass


class InfeasibleSeed(SolverError):
    pass


class GridTooLarge(SolverError):
    pass


class UnsupportedObjective(SolverError):
    pass


# Monitoring errors


class MonitorError(MTSAError):
    """Base class for errors compiling or running a monitoring rule."""


class UnsupportedViewShape(MonitorError):
    pass


class MissingParameter(MonitorError):
    pass


class UnorderedStream(MonitorError):
    pass


# Workspace errors


class WorkspaceError(MTSAError):
    """Base class for errors raised by workspace operations."""


class UnknownEvent(WorkspaceError):
    pass


class UnknownView(WorkspaceError):
    pass


class WorkspaceLocked(WorkspaceError):
    pass


class StatementFailed(WorkspaceError):
    """Wraps the error of one script statement together with its index."""

    def __init__(self, index: int, cause: MTSAError):
        super().__init__(str(cause), index=index)
        self.cause = cause
