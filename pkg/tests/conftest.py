import pytest

ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance check: ``criterion(ok, detail)``."""
    label = request.node.name

    def report(ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES[label] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("_")[1][1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
