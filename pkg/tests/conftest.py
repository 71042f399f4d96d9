import pytest


@pytest.fixture(scope="session")
def criterion(request):
    """Record one acceptance verdict: ``criterion(id, passed, detail)``."""
    store = request.config.__dict__.setdefault("_acceptance", {})

    def record(cid: str, passed: bool, detail: str) -> bool:
        store[cid] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.__dict__.get("_acceptance")
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(store, key=lambda c: int(c.split()[0])):
        passed, detail = store[cid]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {cid}: {detail}")
