import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CRITERIA = {
    1: "propagator accuracy and dt-order",
    2: "cocycle exactness",
    3: "duality",
    4: "kernel positivity",
    5: "smoothing exponent",
    6: "delay solver vs oracle, Picard vs march",
    7: "Gronwall and stability bounds",
    8: "initial-data continuity",
    9: "coefficient continuity",
    10: "delay continuity",
    11: "determinism",
}
_results = {}


@pytest.fixture
def criterion():
    """``criterion(number, passed, detail)`` records one part of an acceptance criterion."""

    def record(number, passed, detail):
        _results.setdefault(number, []).append((bool(passed), detail))
        print(f"criterion {number} part: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, name in CRITERIA.items():
        parts = _results.get(number)
        if not parts:
            terminalreporter.write_line(f"[NOT RUN] {number:>2}. {name}")
            continue
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"[{status}] {number:>2}. {name}: {detail}")
