"""Acceptance criteria AC-1..AC-10 at their stated sizes and tolerances."""
import json

import pytest

from state_shadows.acceptance import CHECKS, run_check

from conftest import ACCEPTANCE_LINES


@pytest.mark.slow
@pytest.mark.parametrize("name", [c[0] for c in CHECKS])
def test_acceptance(name):
    result = run_check(name, level="full", seed=0)
    ACCEPTANCE_LINES.append(result.line)
    print(result.line)
    assert result.passed, json.dumps(result.details, indent=1, default=str)
