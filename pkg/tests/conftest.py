import time

import pytest

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class Recorder:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def __init__(self, number: int, name: str, limit: float | None):
        self.number, self.name, self.limit = number, name, limit
        self.start = time.perf_counter()

    def finish(self, checks: dict[str, bool], detail: str):
        elapsed = time.perf_counter() - self.start
        checks = dict(checks)
        if self.limit is not None:
            checks[f"runtime {elapsed:.1f}s < {self.limit:g}s"] = elapsed < self.limit
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        _ACCEPTANCE[self.number] = (self.name, ok, f"{detail} [{elapsed:.1f}s]")
        assert ok, f"criterion {self.number} failed: {failed}; {detail}"


@pytest.fixture
def criterion():
    def make(number: int, name: str, limit: float | None = None) -> Recorder:
        return Recorder(number, name, limit)
    return make


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        name, ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {k:>2}. {name}: {detail}")
