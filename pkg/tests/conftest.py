import pytest

_results = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def report(request):
    """Attach measured values to the acceptance summary line."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        details = "; ".join(v for k, v in item.user_properties if k == "detail")
        _results.append((marker.args[0], marker.args[1], rep.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, details in sorted(_results):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {number:>2}. {title}"
        if details:
            line += f"  ({details})"
        terminalreporter.write_line(line)
