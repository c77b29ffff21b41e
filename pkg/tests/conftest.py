import pytest

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the terminal summary."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        prev_ok, prev_detail = ACCEPTANCE.get(name, (True, ""))
        joined = "; ".join(x for x in (prev_detail, detail) if x)
        ACCEPTANCE[name] = (prev_ok and ok, joined)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: (len(s.split()[0]), s)):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
