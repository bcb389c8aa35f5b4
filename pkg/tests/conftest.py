import pytest

#: (number, passed, text) per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def criterion():
    def record(number, passed, text):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}"
        ACCEPTANCE.append((number, passed, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
