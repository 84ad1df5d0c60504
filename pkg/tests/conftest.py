import hypothesis

# numba compiles on first call, so the first example of a property can be slow
hypothesis.settings.register_profile("default", deadline=None, max_examples=25)
hypothesis.settings.register_profile("thorough", deadline=None, max_examples=200)
hypothesis.settings.load_profile("default")

import pytest

_VERDICT_LINES = []


@pytest.fixture(scope="session")
def verdict_log():
    """Collects one PASS/FAIL line per acceptance criterion."""
    return _VERDICT_LINES


def pytest_terminal_summary(terminalreporter):
    if _VERDICT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICT_LINES):
            terminalreporter.write_line(line)
