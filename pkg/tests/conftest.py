import re
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "artifact", deadline=None, max_examples=25, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("artifact")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Context manager recording one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(VERDICTS, [])

    @contextmanager
    def record(number, title):
        notes = []
        try:
            yield notes.append
        except BaseException:
            lines.append(f"criterion {number} ({title}): FAIL {'; '.join(notes)}".rstrip())
            raise
        lines.append(f"criterion {number} ({title}): PASS {'; '.join(notes)}".rstrip())

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(re.match(r"criterion (\d+)", s).group(1)), s)):
            terminalreporter.write_line(line)
