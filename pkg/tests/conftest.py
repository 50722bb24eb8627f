import pytest

# filled by tests/test_acceptance.py: criterion number -> (passed, detail, seconds)
ACCEPTANCE: dict[int, tuple[bool, str, float]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail, secs = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({secs:.1f} s)  {detail}")


@pytest.fixture
def record():
    def _record(n: int, ok: bool, detail: str, secs: float):
        ACCEPTANCE[n] = (bool(ok), detail, secs)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({secs:.1f} s) {detail}")

    return _record
