import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> list of (part, passed, detail)
_CRITERIA: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record one part of an acceptance criterion; printed again in the summary."""

    def record(number: int, part: str, passed: bool, detail: str = "") -> bool:
        _CRITERIA.setdefault(number, []).append((part, passed, detail))
        print(f"criterion {number} [{part}]: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        parts = _CRITERIA[number]
        ok = all(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}")
        for part, passed, detail in parts:
            terminalreporter.write_line(f"    {part}: {'PASS' if passed else 'FAIL'} {detail}")
