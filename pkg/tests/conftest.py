import pytest

# lines appended by the acceptance suite; shown even when output is captured
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def emit(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
