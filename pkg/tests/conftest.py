import pytest

_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion (parts are AND-ed)."""

    def record(number, title, passed, detail):
        prev = _CRITERIA.get(number)
        if prev is not None:
            passed = passed and prev[1]
            detail = f"{prev[2]}; {detail}"
        _CRITERIA[number] = (title, bool(passed), detail)
        print(f"[criterion {number}] {'PASS' if passed else 'FAIL'} {title}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"{number:2d}. {'PASS' if passed else 'FAIL'}  {title} -- {detail}")
