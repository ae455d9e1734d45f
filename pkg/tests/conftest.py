import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """``record(n, ok, detail)``: remember one acceptance line for the summary."""
    table = request.config.stash.setdefault(_RESULTS, {})

    def _record(key, ok, detail):
        table[key] = (bool(ok), detail)
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter, config):
    table = config.stash.get(_RESULTS, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(table):
        ok, detail = table[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
