import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict_line():
    """Record one ``PASS``/``FAIL`` summary line; they are printed after the run."""

    def record(label: str, passed: bool, detail: str) -> None:
        line = f"{label}: {'PASS' if passed else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
