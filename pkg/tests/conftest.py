import pytest

_criteria: dict[int, tuple[bool, str]] = {}


class CriterionRecorder:
    def __init__(self, number: int):
        self.number = number

    def __call__(self, passed: bool, detail: str) -> bool:
        _criteria[self.number] = (bool(passed), detail)
        return passed


@pytest.fixture
def criterion(request):
    """``criterion(n)(passed, detail)`` records an acceptance result for the summary."""
    return CriterionRecorder


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        passed, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
