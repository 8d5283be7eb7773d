"""Statement definitions.

This module holds the syntax tree the dialect parser produces: frozen
dataclasses for tables, views, learning events, ``MONITOR`` and ``EXECUTE``
plus the expression nodes they are built from. Two trees are equal when they
describe the same statement: identifiers compare case-insensitively, string
literals compare exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple, Union

__all__ = (
    "Arith",
    "BoolOp",
    "CaseExpr",
    "ColumnDef",
    "ColumnRef",
    "ColumnType",
    "Comparison",
    "CreateEvent",
    "CreateTable",
    "CreateView",
    "Execute",
    "Ident",
    "Monitor",
    "NumberLit",
    "Objective",
    "Select",
    "SelectItem",
    "Statement",
    "StringLit",
    "TableRef",
    "WithClause",
    "COMPARISON_OPERATORS",
)

# the comparison operators a constraint may use; "<>" and "!=" are lexed only to be rejected
COMPARISON_OPERATORS = ("<", "<=", "=", ">=", ">")


class Ident(str):
    """An identifier: keeps its spelling, compares case-insensitively."""

    def __eq__(self, other: object) -> bool:
        if isinstance(other, str):
            return self.casefold() == other.casefold()
        return NotImplemented

    def __ne__(self, other: object) -> bool:
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    def __hash__(self) -> int:
        return hash(self.casefold())

    @property
    def key(self) -> str:
        """str: Catalog lookup key."""
        return self.casefold()


class ColumnType(enum.Enum):
    HOURLY_INTERVAL = "HOURLY_INTERVAL"
    DAILY_INTERVAL = "DAILY_INTERVAL"
    MONTHLY_INTERVAL = "MONTHLY_INTERVAL"
    QUARTERLY_INTERVAL = "QUARTERLY_INTERVAL"
    YEARLY_INTERVAL = "YEARLY_INTERVAL"
    REAL = "REAL"
    INTEGER = "INTEGER"

    @property
    def is_interval(self) -> bool:
        return self.name.endswith("_INTERVAL")


# Expressions


@dataclass(frozen=True)
class ColumnRef:
    qualifier: Ident | None
    name: Ident


@dataclass(frozen=True)
class NumberLit:
    value: float


@dataclass(frozen=True)
class StringLit:
    value: str


@dataclass(frozen=True)
class Arith:
    """Binary arithmetic, ``op`` one of ``+ - *``."""

    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Comparison:
    left: Expr
    op: str
    right: Expr


@dataclass(frozen=True)
class BoolOp:
    """An n-ary ``AND``/``OR``; nested operands never repeat the parent's op."""

    op: str
    operands: Tuple[Condition, ...]


@dataclass(frozen=True)
class CaseExpr:
    """``CASE WHEN condition THEN literal [ELSE literal] END``."""

    condition: Condition
    then: StringLit | NumberLit
    else_: StringLit | NumberLit | None = None


Expr = Union[ColumnRef, NumberLit, StringLit, Arith, CaseExpr]
Condition = Union[Comparison, BoolOp]


# Statements


@dataclass(frozen=True)
class ColumnDef:
    name: Ident
    type: ColumnType


@dataclass(frozen=True)
class CreateTable:
    name: Ident
    columns: Tuple[ColumnDef, ...]
    unique_map: Tuple[Ident, Ident] | None = None

    def column(self, name: str) -> ColumnDef | None:
        for column in self.columns:
            if column.name == name:
                return column
        return None


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: Ident | None = None

    @property
    def output_name(self) -> Ident | None:
        """Name of the produced column: the alias, else the referenced column."""
        if self.alias is not None:
            return self.alias
        if isinstance(self.expr, ColumnRef):
            return self.expr.name
        return None


@dataclass(frozen=True)
class TableRef:
    name: Ident
    alias: Ident | None = None

    @property
    def binding(self) -> Ident:
        """Ident: The name column references use for this table."""
        return self.alias if self.alias is not None else self.name


@dataclass(frozen=True)
class Select:
    items: Tuple[SelectItem, ...]
    from_refs: Tuple[TableRef, ...]
    where: Condition | None = None


@dataclass(frozen=True)
class CreateView:
    name: Ident
    select: Select


@dataclass(frozen=True)
class WithClause:
    """A constraint of a learning event.

    ``guard`` is the ``alias.Indicator`` column tested against ``'1'``; a clause
    without a guard is a plain inequality.
    """

    constraint: Comparison
    guard: ColumnRef | None = None

    @property
    def is_implication(self) -> bool:
        return self.guard is not None


@dataclass(frozen=True)
class Objective:
    direction: str  # "MINIMIZE" | "MAXIMIZE"
    aggregate: str  # "SUM"
    expr: Expr
    alias: Ident | None = None


@dataclass(frozen=True)
class CreateEvent:
    name: Ident
    learn_params: Tuple[Ident, ...]
    objective: Objective
    with_clauses: Tuple[WithClause, ...]
    from_refs: Tuple[TableRef, ...]
    where: Condition | None = None


@dataclass(frozen=True)
class Monitor:
    view_name: Ident


@dataclass(frozen=True)
class Execute:
    event_name: Ident


Statement = Union[CreateTable, CreateView, CreateEvent, Monitor, Execute]


def statement_kind(stmt: Statement) -> str:
    """Short lowercase kind used in catalogs and reports."""
    return {
        CreateTable: "table",
        CreateView: "view",
        CreateEvent: "event",
        Monitor: "monitor",
        Execute: "execute",
    }[type(stmt)]


def statement_name(stmt: Statement) -> str:
    if isinstance(stmt, Monitor):
        return str(stmt.view_name)
    if isinstance(stmt, Execute):
        return str(stmt.event_name)
    return str(stmt.name)
