import pytest

_outcomes: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion this test decides")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    label = marker.args[0]
    failed = rep.failed or (rep.when == "call" and rep.outcome != "passed")
    prev = _outcomes.get(item.nodeid)
    if failed:
        _outcomes[item.nodeid] = (label, "FAIL")
    elif rep.when == "call" and prev is None:
        _outcomes[item.nodeid] = (label, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in sorted(_outcomes.values(), key=lambda v: v[0]):
        terminalreporter.write_line(f"{status}  {label}")
