"""Acceptance gate: every criterion runs at its stated tolerance.

Each test prints one pass/fail line (also available via `bankfair verify`).
"""

import pytest

from bankfair import acceptance

CHECKS = sorted(acceptance.CRITERIA)


@pytest.mark.parametrize("cid", CHECKS)
def test_criterion(cid):
    result = acceptance.CRITERIA[cid]()
    print(result.line())
    assert result.passed, result.line()


def test_every_criterion_is_covered():
    assert CHECKS == list(range(1, 10))
