import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_line(request):
    """Record the one-line pass/fail summary of an acceptance criterion."""
    seen = []

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
        ACCEPTANCE_LINES[number] = line
        seen.append(number)
        print(line)
        return ok

    yield record
    number = getattr(request.function, "criterion", None)
    if number is not None and number not in seen:
        ACCEPTANCE_LINES[number] = f"[FAIL] criterion {number:2d}: raised before completing ({request.node.name})"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
