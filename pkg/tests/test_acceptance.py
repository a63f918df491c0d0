"""Acceptance criteria, one test each, at the stated tolerances.

Each test prints one PASS/FAIL line per criterion straight to the terminal.
The same checks back ``ebql verify``.
"""
import pytest

from ebql import acceptance


@pytest.mark.parametrize("check", acceptance.CHECKS, ids=[c.key for c in acceptance.CHECKS])
def test_criterion(check, capsys):
    result = check()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
