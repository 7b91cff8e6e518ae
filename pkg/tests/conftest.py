import pytest

VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Print and keep one PASS/FAIL line per acceptance criterion."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        VERDICTS[number] = line
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[number])
