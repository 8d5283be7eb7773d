"""Lexer, recursive-descent parser and pretty-printer of the ``.mtsa`` dialect.

The grammar is the restricted SQL the learning and monitoring services are
written in (published in ``docs/dialect.rst``)::

    script     = { statement ";" } ;
    statement  = create_table | create_view | create_event | monitor | execute ;
    condition  = conjunction { "OR" conjunction } ;
    conjunction= factor { "AND" factor } ;
    factor     = "(" condition ")" | expr eop expr ;
    expr       = term { ("+" | "-") term } ;
    term       = unary { "*" unary } ;

Keywords are case-insensitive, identifiers keep their spelling and compare
case-insensitively, strings are single-quoted (``''`` escapes a quote) and may
span lines, ``--`` starts a comment.
"""

from __future__ import annotations

import logging
import re
from typing import NamedTuple

from mtsa.exceptions import LexError, ScriptSyntaxError, UnknownKeyword
from mtsa.statements import (
    COMPARISON_OPERATORS,
    Arith,
    BoolOp,
    CaseExpr,
    ColumnDef,
    ColumnRef,
    ColumnType,
    Comparison,
    Condition,
    CreateEvent,
    CreateTable,
    CreateView,
    Execute,
    Expr,
    Ident,
    Monitor,
    NumberLit,
    Objective,
    Select,
    SelectItem,
    Statement,
    StringLit,
    TableRef,
    WithClause,
)
from mtsa.utils import format_number

LOG = logging.getLogger(__name__)

__all__ = ("Token", "parse_script", "pretty_print", "tokenize")

KEYWORDS = frozenset(
    """
    CREATE TABLE VIEW EVENT AS SELECT FROM WHERE CASE WHEN THEN ELSE END AND OR
    MONITOR EXECUTE GC_LEARN FOR MINIMIZE MAXIMIZE SUM WITH UNIQUE MAP UNIQUE_MAP
    """.split()
)

# keyword, ident, number, string, op (comparison and arithmetic), punct, eof
KEYWORD, IDENT, NUMBER, STRING, OP, PUNCT, EOF = (
    "KEYWORD",
    "IDENT",
    "NUMBER",
    "STRING",
    "OP",
    "PUNCT",
    "EOF",
)

_OP_ALIASES = {"≤": "<=", "≥": ">="}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<number>\d+\.\d*|\.\d+|\d+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|!=|[<>=≤≥+\-*])
  | (?P<punct>[(),.;])
  | (?P<quote>')
    """,
    re.VERBOSE,
)


class Token(NamedTuple):
    kind: str
    value: str
    line: int
    col: int

    def describe(self) -> str:
        if self.kind == EOF:
            return "end of input"
        if self.kind == STRING:
            return f"string '{self.value}'"
        return repr(self.value)


def tokenize(text: str) -> list[Token]:
    """Split script text into tokens.

    Keywords come back upper-cased; identifiers keep their spelling.

    Raises:
        LexError: on an illegal character or an unterminated string, with the
            line and column where it starts.
    """
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        col = pos - line_start + 1
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(f"illegal character {text[pos]!r}", line=line, column=col)
        kind = m.lastgroup
        value = m.group()
        if kind == "quote":
            chunks = []
            i = pos + 1
            while True:
                j = text.find("'", i)
                if j < 0:
                    raise LexError("unterminated string literal", line=line, column=col)
                chunks.append(text[i:j])
                if text.startswith("''", j):
                    chunks.append("'")
                    i = j + 2
                    continue
                end = j + 1
                break
            tokens.append(Token(STRING, "".join(chunks), line, col))
            value = text[pos:end]
            m_end = end
        else:
            m_end = m.end()
            if kind == "number":
                tokens.append(Token(NUMBER, value, line, col))
            elif kind == "word":
                upper = value.upper()
                if upper in KEYWORDS:
                    tokens.append(Token(KEYWORD, upper, line, col))
                else:
                    tokens.append(Token(IDENT, value, line, col))
            elif kind == "op":
                tokens.append(Token(OP, _OP_ALIASES.get(value, value), line, col))
            elif kind == "punct":
                tokens.append(Token(PUNCT, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m_end
    tokens.append(Token(EOF, "", line, pos - line_start + 1))
    return tokens


class _Backtrack(Exception):
    pass


class Parser:
    """Recursive-descent parser over a token list.

    Initialize with the tokens, call :meth:`parse_script` to get the statements.
    """

    def __init__(self, tokens: list[Token]):
        self._tokens = tokens
        self._pos = 0
        self._statements = 0

    # token helpers

    def _peek(self, offset: int = 0) -> Token:
        return self._tokens[min(self._pos + offset, len(self._tokens) - 1)]

    def _advance(self) -> Token:
        token = self._peek()
        if token.kind != EOF:
            self._pos += 1
        return token

    def _check(self, kind: str, value: str | None = None, offset: int = 0) -> bool:
        token = self._peek(offset)
        return token.kind == kind and (value is None or token.value == value)

    def _match(self, kind: str, value: str | None = None) -> bool:
        if self._check(kind, value):
            self._advance()
            return True
        return False

    def _error(self, expected: str) -> ScriptSyntaxError:
        token = self._peek()
        return ScriptSyntaxError(
            f"expected {expected}, found {token.describe()}",
            line=token.line,
            column=token.col,
            statement_index=self._statements,
        )

    def _expect(self, kind: str, value: str | None = None, what: str | None = None) -> Token:
        if not self._check(kind, value):
            raise self._error(what or repr(value) if value else what or kind.lower())
        return self._advance()

    def _keyword(self, value: str) -> Token:
        return self._expect(KEYWORD, value, value)

    def _punct(self, value: str) -> Token:
        return self._expect(PUNCT, value, repr(value))

    def _ident(self, what: str = "identifier") -> Ident:
        return Ident(self._expect(IDENT, what=what).value)

    # statements

    def parse_script(self) -> list[Statement]:
        statements: list[Statement] = []
        while not self._check(EOF):
            if self._match(PUNCT, ";"):
                continue
            statements.append(self._statement())
            self._punct(";")
            self._statements += 1
        return statements

    def _statement(self) -> Statement:
        token = self._peek()
        if self._match(KEYWORD, "CREATE"):
            if self._match(KEYWORD, "TABLE"):
                return self._create_table()
            if self._match(KEYWORD, "VIEW"):
                return self._create_view()
            if self._match(KEYWORD, "EVENT"):
                return self._create_event()
            if self._check(IDENT):
                raise self._unknown(self._peek())
            raise self._error("TABLE, VIEW or EVENT")
        if self._match(KEYWORD, "MONITOR"):
            return Monitor(self._ident("view name"))
        if self._match(KEYWORD, "EXECUTE"):
            return Execute(self._ident("event name"))
        if token.kind == IDENT:
            raise self._unknown(token)
        raise self._error("CREATE, MONITOR or EXECUTE")

    def _unknown(self, token: Token) -> UnknownKeyword:
        return UnknownKeyword(
            f"unknown keyword {token.value!r}",
            line=token.line,
            column=token.col,
            statement_index=self._statements,
        )

    def _create_table(self) -> CreateTable:
        name = self._ident("table name")
        self._punct("(")
        columns: list[ColumnDef] = []
        unique_map = None
        while True:
            if self._check(KEYWORD, "UNIQUE") or self._check(KEYWORD, "UNIQUE_MAP"):
                unique_map = self._unique_map()
            else:
                if unique_map is not None:
                    raise self._error("')' after UNIQUE MAP")
                column = self._ident("column name")
                columns.append(ColumnDef(column, self._column_type()))
            if not self._match(PUNCT, ","):
                break
        self._punct(")")
        if not columns:
            raise self._error("at least one column")
        return CreateTable(name, tuple(columns), unique_map)

    def _column_type(self) -> ColumnType:
        token = self._peek()
        if token.kind not in (IDENT, KEYWORD):
            raise self._error("column type")
        try:
            column_type = ColumnType[token.value.upper()]
        except KeyError:
            raise self._unknown(token) from None
        self._advance()
        return column_type

    def _unique_map(self) -> tuple[Ident, Ident]:
        if self._match(KEYWORD, "UNIQUE"):
            self._keyword("MAP")
        else:
            self._keyword("UNIQUE_MAP")
        self._punct("(")
        first = self._ident()
        self._punct(",")
        second = self._ident()
        self._punct(")")
        return first, second

    def _create_view(self) -> CreateView:
        name = self._ident("view name")
        self._keyword("AS")
        self._punct("(")
        select = self._select()
        self._punct(")")
        return CreateView(name, select)

    def _select(self) -> Select:
        self._keyword("SELECT")
        items = [self._select_item()]
        while self._match(PUNCT, ","):
            items.append(self._select_item())
        self._keyword("FROM")
        from_refs = self._table_refs()
        where = self._condition() if self._match(KEYWORD, "WHERE") else None
        return Select(tuple(items), from_refs, where)

    def _select_item(self) -> SelectItem:
        expr = self._expr()
        alias = self._ident("alias") if self._match(KEYWORD, "AS") else None
        return SelectItem(expr, alias)

    def _table_refs(self) -> tuple[TableRef, ...]:
        refs = [self._table_ref()]
        while self._match(PUNCT, ","):
            refs.append(self._table_ref())
        return tuple(refs)

    def _table_ref(self) -> TableRef:
        name = self._ident("table name")
        alias = Ident(self._advance().value) if self._check(IDENT) else None
        return TableRef(name, alias)

    def _create_event(self) -> CreateEvent:
        name = self._ident("event name")
        self._punct("(")
        self._keyword("GC_LEARN")
        learn = [self._ident("parameter table")]
        while self._match(PUNCT, ","):
            learn.append(self._ident("parameter table"))
        self._keyword("FOR")
        objective = self._objective()
        self._keyword("WITH")
        clauses = [self._with_clause()]
        while self._match(KEYWORD, "AND"):
            clauses.append(self._with_clause())
        self._keyword("FROM")
        from_refs = self._table_refs()
        where = self._condition() if self._match(KEYWORD, "WHERE") else None
        self._punct(")")
        return CreateEvent(name, tuple(learn), objective, tuple(clauses), from_refs, where)

    def _objective(self) -> Objective:
        token = self._peek()
        if not (self._match(KEYWORD, "MINIMIZE") or self._match(KEYWORD, "MAXIMIZE")):
            raise self._error("MINIMIZE or MAXIMIZE")
        self._keyword("SUM")
        self._punct("(")
        expr = self._expr()
        self._punct(")")
        alias = self._ident("alias") if self._match(KEYWORD, "AS") else None
        return Objective(token.value, "SUM", expr, alias)

    def _with_clause(self) -> WithClause:
        # guard form: alias.Column = '1' THEN comparison
        if (
            self._check(IDENT)
            and self._check(PUNCT, ".", 1)
            and self._check(IDENT, offset=2)
            and self._check(OP, "=", 3)
            and self._check(STRING, offset=4)
            and self._check(KEYWORD, "THEN", 5)
        ):
            qualifier = Ident(self._advance().value)
            self._advance()
            column = Ident(self._advance().value)
            self._advance()
            literal = self._advance()
            if literal.value != "1":
                raise ScriptSyntaxError(
                    "an implication guard must compare with '1'",
                    line=literal.line,
                    column=literal.col,
                    statement_index=self._statements,
                )
            self._keyword("THEN")
            return WithClause(self._comparison(), ColumnRef(qualifier, column))
        return WithClause(self._comparison())

    # conditions

    def _condition(self) -> Condition:
        operands = [self._conjunction()]
        while self._match(KEYWORD, "OR"):
            operands.append(self._conjunction())
        return _junction("OR", operands)

    def _conjunction(self) -> Condition:
        operands = [self._factor()]
        while self._match(KEYWORD, "AND"):
            operands.append(self._factor())
        return _junction("AND", operands)

    def _factor(self) -> Condition:
        if not self._check(PUNCT, "("):
            return self._comparison()
        # "(" opens either a grouped condition or an arithmetic operand
        start = self._pos
        grouped_error: ScriptSyntaxError | None = None
        try:
            self._advance()
            condition = self._condition()
            self._punct(")")
            if self._check(OP):
                raise _Backtrack
            return condition
        except ScriptSyntaxError as err:
            grouped_error = err
        except _Backtrack:
            pass
        self._pos = start
        try:
            return self._comparison()
        except ScriptSyntaxError as err:
            if grouped_error is not None and _position(grouped_error) > _position(err):
                raise grouped_error from None
            raise

    def _comparison(self) -> Comparison:
        left = self._expr()
        token = self._peek()
        if token.kind != OP or token.value in ("+", "-", "*"):
            raise self._error("comparison operator")
        if token.value not in COMPARISON_OPERATORS:
            raise ScriptSyntaxError(
                f"unsupported comparison operator {token.value!r}",
                line=token.line,
                column=token.col,
                statement_index=self._statements,
            )
        self._advance()
        return Comparison(left, token.value, self._expr())

    # expressions

    def _expr(self) -> Expr:
        left = self._term()
        while self._check(OP, "+") or self._check(OP, "-"):
            op = self._advance().value
            left = Arith(op, left, self._term())
        return left

    def _term(self) -> Expr:
        left = self._unary()
        while self._check(OP, "*"):
            self._advance()
            left = Arith("*", left, self._unary())
        return left

    def _unary(self) -> Expr:
        if self._match(OP, "-"):
            operand = self._unary()
            if isinstance(operand, NumberLit):
                return NumberLit(-operand.value)
            return Arith("*", NumberLit(-1.0), operand)
        return self._primary()

    def _primary(self) -> Expr:
        token = self._peek()
        if token.kind == NUMBER:
            self._advance()
            return NumberLit(float(token.value))
        if token.kind == STRING:
            self._advance()
            return StringLit(token.value)
        if token.kind == IDENT:
            self._advance()
            if self._match(PUNCT, "."):
                return ColumnRef(Ident(token.value), self._ident("column name"))
            return ColumnRef(None, Ident(token.value))
        if self._match(KEYWORD, "CASE"):
            return self._case()
        if self._match(PUNCT, "("):
            expr = self._expr()
            self._punct(")")
            return expr
        raise self._error("expression")

    def _case(self) -> CaseExpr:
        self._keyword("WHEN")
        condition = self._condition()
        self._keyword("THEN")
        then = self._literal()
        else_ = self._literal() if self._match(KEYWORD, "ELSE") else None
        self._keyword("END")
        return CaseExpr(condition, then, else_)

    def _literal(self) -> StringLit | NumberLit:
        expr = self._unary()
        if not isinstance(expr, (StringLit, NumberLit)):
            raise ScriptSyntaxError(
                "CASE results must be literals",
                line=self._peek().line,
                column=self._peek().col,
                statement_index=self._statements,
            )
        return expr


def _position(err: ScriptSyntaxError) -> tuple[int, int]:
    return err.context.get("line", 0), err.context.get("column", 0)


def _junction(op: str, operands: list[Condition]) -> Condition:
    if len(operands) == 1:
        return operands[0]
    flat: list[Condition] = []
    for operand in operands:
        if isinstance(operand, BoolOp) and operand.op == op:
            flat.extend(operand.operands)
        else:
            flat.append(operand)
    return BoolOp(op, tuple(flat))


def parse_script(text: str) -> list[Statement]:
    """Parse a whole script.

    Args:
        text (str): Script text, one or more ``;``-terminated statements.

    Returns:
        List[Statement]: The statements in source order.

    Raises:
        LexError: via :py:func:`tokenize`.
        ScriptSyntaxError: with the expected token, the position and the index
            of the statement being parsed.
        UnknownKeyword: when a statement or a column type is not part of the dialect.
    """
    statements = Parser(tokenize(text)).parse_script()
    LOG.debug(f"Parsed {len(statements)} statements")
    return statements


# pretty printer

_PRECEDENCE = {"+": 1, "-": 1, "*": 2}


def _quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def _ident(name: Ident | str) -> str:
    return str(name)


def format_expr(expr: Expr) -> str:
    if isinstance(expr, ColumnRef):
        if expr.qualifier is None:
            return _ident(expr.name)
        return f"{_ident(expr.qualifier)}.{_ident(expr.name)}"
    if isinstance(expr, NumberLit):
        return format_number(expr.value)
    if isinstance(expr, StringLit):
        return _quote(expr.value)
    if isinstance(expr, CaseExpr):
        text = f"(CASE WHEN {format_condition(expr.condition)} THEN {format_expr(expr.then)}"
        if expr.else_ is not None:
            text += f" ELSE {format_expr(expr.else_)}"
        return text + " END)"
    if isinstance(expr, Arith):
        mine = _PRECEDENCE[expr.op]
        left = format_expr(expr.left)
        right = format_expr(expr.right)
        if isinstance(expr.left, Arith) and _PRECEDENCE[expr.left.op] < mine:
            left = f"({left})"
        if isinstance(expr.right, Arith) and _PRECEDENCE[expr.right.op] <= mine:
            right = f"({right})"
        elif isinstance(expr.right, NumberLit) and expr.right.value < 0 and expr.op == "*":
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    raise TypeError(f"not an expression: {expr!r}")


def format_condition(condition: Condition) -> str:
    if isinstance(condition, Comparison):
        return f"{format_expr(condition.left)} {condition.op} {format_expr(condition.right)}"
    parts = []
    for operand in condition.operands:
        text = format_condition(operand)
        parts.append(f"({text})" if isinstance(operand, BoolOp) else text)
    return f" {condition.op} ".join(parts)


def _format_refs(refs: tuple[TableRef, ...]) -> str:
    return ", ".join(
        _ident(r.name) if r.alias is None else f"{_ident(r.name)} {_ident(r.alias)}"
        for r in refs
    )


def _format_select(select: Select, indent: str) -> str:
    items = ", ".join(
        format_expr(i.expr) if i.alias is None else f"{format_expr(i.expr)} AS {_ident(i.alias)}"
        for i in select.items
    )
    text = f"{indent}SELECT {items}\n{indent}FROM {_format_refs(select.from_refs)}"
    if select.where is not None:
        text += f"\n{indent}WHERE {format_condition(select.where)}"
    return text


def pretty_print(stmt: Statement) -> str:
    """Render a statement as canonical text.

    ``parse_script(pretty_print(s))`` gives back ``[s]``.
    """
    if isinstance(stmt, Monitor):
        return f"MONITOR {_ident(stmt.view_name)};"
    if isinstance(stmt, Execute):
        return f"EXECUTE {_ident(stmt.event_name)};"
    if isinstance(stmt, CreateTable):
        parts = [f"{_ident(c.name)} {c.type.value}" for c in stmt.columns]
        if stmt.unique_map is not None:
            parts.append(f"UNIQUE MAP({_ident(stmt.unique_map[0])}, {_ident(stmt.unique_map[1])})")
        body = ",\n  ".join(parts)
        return f"CREATE TABLE {_ident(stmt.name)} (\n  {body});"
    if isinstance(stmt, CreateView):
        return f"CREATE VIEW {_ident(stmt.name)} AS (\n{_format_select(stmt.select, '  ')});"
    if isinstance(stmt, CreateEvent):
        objective = stmt.objective
        head = (
            f"CREATE EVENT {_ident(stmt.name)} (\n"
            f"  GC_LEARN {', '.join(_ident(p) for p in stmt.learn_params)}\n"
            f"  FOR {objective.direction} {objective.aggregate}({format_expr(objective.expr)})"
        )
        if objective.alias is not None:
            head += f" AS {_ident(objective.alias)}"
        clauses = []
        for clause in stmt.with_clauses:
            text = format_condition(clause.constraint)
            if clause.guard is not None:
                text = f"{format_expr(clause.guard)} = '1' THEN\n    {text}"
            clauses.append(text)
        text = head + "\n  WITH " + "\n  AND ".join(clauses)
        text += f"\n  FROM {_format_refs(stmt.from_refs)}"
        if stmt.where is not None:
            text += f"\n  WHERE {format_condition(stmt.where)}"
        return text + ");"
    raise TypeError(f"not a statement: {stmt!r}")
