"""Acceptance gate: every criterion at its stated tolerance.

One test per criterion; each prints its pass/fail line.  The registry in
layerforge.acceptance is the single source of truth shared with the CLI
`all` subcommand.
"""

import pytest

from layerforge.acceptance import CRITERIA


@pytest.mark.parametrize("criterion", CRITERIA,
                         ids=[fn.__name__.replace("criterion_", "c")
                              for fn in CRITERIA])
def test_criterion(criterion, actx):
    result = criterion(actx)
    print(result.line())
    for detail in result.details:
        print(f"    {detail}")
    assert result.passed, "\n".join([result.line(), *result.details])
