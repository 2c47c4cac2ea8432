"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run directly (``python3 tests/test_acceptance.py``) for the lines alone.
"""
import sys

import pytest

from conewave.acceptance import CRITERIA, run_acceptance

LINES: list[str] = []


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    (res,) = run_acceptance([number])
    line = res.line()
    LINES.append(line)
    print(line)
    assert res.passed, line


if __name__ == "__main__":
    results = run_acceptance()
    for r in results:
        print(r.line())
    sys.exit(0 if all(r.passed for r in results) else 1)
