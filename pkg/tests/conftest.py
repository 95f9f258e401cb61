import pytest

_LINES: list[tuple[int, str]] = []


@pytest.fixture
def criterion():
    """record(n, passed, detail) for a pass/fail line; note(n, text) for a diagnostic."""

    class Recorder:
        def __call__(self, n: int, passed: bool, detail: str) -> bool:
            line = f"criterion {n:2d}  {'PASS' if passed else 'FAIL'}  {detail}"
            _LINES.append((n, line))
            print(line)
            return passed

        def note(self, n: int, text: str) -> None:
            line = f"criterion {n:2d}  note  {text}"
            _LINES.append((n, line))
            print(line)

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES, key=lambda p: p[0]):
        terminalreporter.write_line(line)
