from collections import defaultdict

import pytest

_OUTCOMES: dict[int, list[tuple[str, bool]]] = defaultdict(list)
_NOTES: dict[int, list[str]] = defaultdict(list)


@pytest.fixture
def note(request):
    """Attach a one-line measurement to the current test's criterion."""
    marker = request.node.get_closest_marker("criterion")
    k = marker.args[0] if marker else 0

    def add(text):
        _NOTES[k].append(text)
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _OUTCOMES[marker.args[0]].append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_OUTCOMES):
        parts = _OUTCOMES[k]
        ok = all(p for _, p in parts)
        failed = [name for name, p in parts if not p]
        detail = "; ".join(_NOTES.get(k, []))
        if failed:
            detail = f"failed: {', '.join(failed)}" + (f"; {detail}" if detail else "")
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}")
