import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(label): test implements the named acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    key = (label, item.name)
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
        _acceptance[key] = status


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for (label, name), status in sorted(_acceptance.items(), key=lambda kv: _sort_key(kv[0])):
        terminalreporter.write_line(f"[{status}] {label}  ({name})")


def _sort_key(key):
    label, name = key
    digits = "".join(ch for ch in label.split()[0] if ch.isdigit())
    return (int(digits) if digits else 999, name)
