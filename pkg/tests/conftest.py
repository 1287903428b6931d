import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion covered by this test")


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to the acceptance report."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        details = [v for k, v in item.user_properties if k == "detail"]
        _CRITERIA.append((mark.args[0], mark.args[1], rep.outcome, "; ".join(details)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    groups = {}
    for cid, title, outcome, text in _CRITERIA:
        groups.setdefault(cid, []).append((title, outcome, text))
    for cid in sorted(groups, key=lambda c: int("".join(ch for ch in c if ch.isdigit()))):
        rows = groups[cid]
        tag = "PASS" if all(o == "passed" for _, o, _ in rows) else "FAIL"
        titles = list(dict.fromkeys(t for t, _, _ in rows))
        terminalreporter.write_line(f"[{tag}] criterion {cid}: {'; '.join(titles)}")
        for title, outcome, text in rows:
            if text or outcome != "passed":
                mark = "" if outcome == "passed" else f"({outcome}) "
                terminalreporter.write_line(f"       {mark}{text}")
