import contextlib

import pytest

ACCEPTANCE = {}


@contextlib.contextmanager
def criterion(key, title):
    """Record the outcome of one acceptance criterion for the summary."""
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE[key] = ("FAIL", title, str(exc).splitlines()[0] if str(exc) else type(exc).__name__)
        raise
    else:
        ACCEPTANCE.setdefault(key, ("PASS", title, ""))


@pytest.fixture
def acceptance():
    return criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[key]
        line = f"[{status}] {key}: {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
