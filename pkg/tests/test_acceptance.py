"""End-to-end acceptance: one PASS/FAIL line per criterion.

Each criterion runs the matching verification suite (the same code behind
``insfem verify``) and also checks its wall-time budget.
"""

import pytest

from insfem.verify.checks import at_most
from insfem.verify.study import SUITES

# criterion -> (suite, runtime budget in seconds)
CRITERIA = {
    1: ("advection", 120),
    2: ("mms", 600),
    3: ("jeffery_hamel", 300),
    4: ("cone", 120),
    5: ("jacobian", 60),
    6: ("solvers", 120),
    7: ("temporal", 120),
    8: ("parser", 30),
    9: ("cavity", 300),
}


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion{n}")
def test_criterion(number, capsys):
    name, budget = CRITERIA[number]
    result = SUITES[name]()
    checks = result.checks + [at_most("runtime [s]", result.seconds, budget)]
    failed = [c for c in checks if not c.passed]
    status = "FAIL" if failed else "PASS"
    line = f"{status} criterion {number} ({name}): {len(checks) - len(failed)}/{len(checks)} checks, {result.seconds:.1f} s"
    if failed:
        line += "; failed: " + "; ".join(f"{c.name} = {c.value:.6g} (target {c.target})" for c in failed)
    with capsys.disabled():
        print(f"\n{line}")
    assert not failed, result.report()
