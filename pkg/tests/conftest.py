"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    if report.when == "setup" and report.passed:
        return
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    entry = _OUTCOMES.setdefault(number, [title, True, []])
    entry[1] = entry[1] and report.passed
    if detail:
        entry[2].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        title, ok, details = _OUTCOMES[number]
        line = f"AC{number:>2} {'PASS' if ok else 'FAIL'}  {title}"
        if details:
            line += f"  [{' | '.join(details)}]"
        terminalreporter.write_line(line)
