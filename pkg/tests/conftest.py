import pytest


def pytest_configure(config):
    config._verdicts = []


@pytest.fixture
def verdict(request):
    """Record a one-line PASS/FAIL verdict and fail the test when it is negative."""
    lines = request.config._verdicts

    def record(label, ok, detail="", gating=True):
        tag = ("PASS" if ok else "FAIL") if gating else ("info" if ok else "INFO-FAIL")
        lines.append(f"[{tag}] {label}: {detail}")
        if gating:
            assert ok, f"{label}: {detail}"

    record.note = lambda text: lines.append(f"       {text}")
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if config._verdicts:
        terminalreporter.section("acceptance verdicts")
        for line in config._verdicts:
            terminalreporter.write_line(line)
