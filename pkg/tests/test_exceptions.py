from __future__ import annotations

import unittest

import pytest

from mtsa.exceptions import (
    CompileError,
    DialectError,
    MissingSeries,
    MTSAError,
    ScriptSyntaxError,
    StatementFailed,
    UnresolvedReference,
    WorkspaceError,
)

DUMMY_TEXT = "nice text"


class ExceptionsTests(unittest.TestCase):
    def test_text_added(self):
        assert str(MTSAError(DUMMY_TEXT)) == f"MTSAError: {DUMMY_TEXT}"

    def test_context_added(self):
        # GIVEN: an error raised with structured details
        err = ScriptSyntaxError("expected ';'", line=3, column=7, statement_index=2)
        # WHEN: it is rendered
        err_str = str(err)
        # THEN: every detail follows the message, sorted by key
        assert err_str.splitlines()[0] == "ScriptSyntaxError: expected ';'"
        assert err_str.splitlines()[1:] == ["\tcolumn = 7", "\tline = 3", "\tstatement_index = 2"]

    def test_context_is_readable_as_attributes(self):
        err = MissingSeries("holes", series="ElectricPowerDemand", first_missing=3)
        assert err.series == "ElectricPowerDemand"
        assert err.first_missing == 3
        with pytest.raises(AttributeError):
            err.line

    def test_none_values_are_dropped(self):
        err = MTSAError(DUMMY_TEXT, line=None, column=4)
        assert err.context == {"column": 4}
        assert "line" not in str(err)

    def test_no_text(self):
        assert str(MTSAError()) == "MTSAError"

    def test_hierarchy(self):
        assert issubclass(ScriptSyntaxError, DialectError)
        assert issubclass(UnresolvedReference, CompileError)
        assert issubclass(StatementFailed, WorkspaceError)
        for cls in (DialectError, CompileError, WorkspaceError):
            assert issubclass(cls, MTSAError)

    def test_statement_failed_wraps_cause(self):
        cause = UnresolvedReference("unknown alias X", scope="E")
        err = StatementFailed(4, cause)
        assert err.index == 4
        assert err.cause is cause
        assert "unknown alias X" in str(err)
