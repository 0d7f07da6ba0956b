import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        for key, val in report.user_properties:
            if key == "criterion":
                n, title = val
                why = []
                if report.outcome == "failed":
                    crash = getattr(report.longrepr, "reprcrash", None)
                    why = [crash.message.splitlines()[0]] if crash else report.longreprtext.splitlines()[-1:]
                _criteria[n] = (title, report.outcome, why)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is not None and not any(k == "criterion" for k, _ in item.user_properties):
        item.user_properties.append(("criterion", tuple(marker.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, outcome, why = _criteria[n]
        line = f"criterion {n:2d}: {'PASS' if outcome == 'passed' else 'FAIL'}  {title}"
        if why:
            line += f"  ({why[0].strip()[:160]})"
        terminalreporter.write_line(line)
