import pytest

RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """record(label, ok, detail) stores one acceptance line for the terminal summary."""
    def _record(label: str, ok: bool, detail: str = "") -> bool:
        RESULTS[label] = (bool(ok), detail)
        return bool(ok)
    return _record


def _key(label: str):
    num = label.split()[1]
    return int("".join(c for c in num if c.isdigit())), num


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(RESULTS, key=_key):
        ok, detail = RESULTS[label]
        terminalreporter.write_line(f"{label}: {'PASS' if ok else 'FAIL'}  {detail}")
