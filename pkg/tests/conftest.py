from __future__ import annotations

import pytest

_LOG = pytest.StashKey[dict]()


@pytest.fixture
def criterion_log(request):
    """Maps criterion number -> (passed, title, detail); printed after the run."""
    return request.config.stash.setdefault(_LOG, {})


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_LOG, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(log):
        passed, title, detail = log[n]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {n:>2}. {title}: {detail}")
