import pytest

# criterion number -> (name, passed, detail); filled by the acceptance suite
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d} {name}: {detail}")


@pytest.fixture
def record_criterion():
    def record(n: int, name: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = (name, bool(ok), detail)
        print(f"[{'PASS' if ok else 'FAIL'}] {n:2d} {name}: {detail}")

    return record
