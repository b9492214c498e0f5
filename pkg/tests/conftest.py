"""Prints one pass/fail line per acceptance criterion after the run."""

_RESULTS = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        _RESULTS[name] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS, key=lambda n: int(n.split("_")[2])):
        outcome, detail = _RESULTS[name]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        label = name[len("test_criterion_"):]
        terminalreporter.write_line(f"{verdict}  {label}  {detail}".rstrip())
