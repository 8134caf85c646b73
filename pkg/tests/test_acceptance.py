"""Exit criteria at their stated sample sizes and tolerances.

Each test prints one pass/fail line (plus the individual checks) so the
suite doubles as a report when run with ``pytest -v``.
"""
import pytest

from sojourn.validate import CRITERIA, Settings, run_criterion

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=[f"criterion_{k:02d}" for k in sorted(CRITERIA)])
def test_criterion(number, capsys):
    result = run_criterion(number, Settings())
    with capsys.disabled():
        print()
        print(result.line())
        for c in result.checks:
            mark = "ok " if c["ok"] else "BAD"
            print(f"    {mark} {c['label']}: {c['value']!r} vs {c['bound']!r}")
    failing = [c["label"] for c in result.checks if not c["ok"]]
    assert result.passed, f"criterion {number} ({result.title}) failing checks: {failing}"
