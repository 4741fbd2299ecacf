import re

_CRITERIA: dict[str, tuple[str, float]] = {}
_NAME = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)$")


def pytest_runtest_logreport(report):
    m = _NAME.search(report.nodeid)
    if not m:
        return
    key = f"criterion {int(m.group(1)):2d} {m.group(2).replace('_', ' ')}"
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        if _CRITERIA.get(key, ("PASS",))[0] == "FAIL":
            return
        _CRITERIA[key] = (status, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        status, secs = _CRITERIA[key]
        terminalreporter.write_line(f"{status}  {key}  ({secs:.2f}s)")
