"""Shared fixtures plus the one-line-per-criterion acceptance summary."""

import numpy as np
import pytest

from hdspeech.acoustic.model import single_gaussian_model

_OUTCOMES: dict = {}
_NOTES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by a test")
    config.addinivalue_line("markers", "slow: end-to-end runs taking minutes")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _OUTCOMES.setdefault(number, {"title": title, "passed": True, "seen": False, "secs": 0.0})
    if rep.failed:
        entry["passed"] = False
        entry["seen"] = True
    elif rep.when == "call":
        entry["seen"] = True
        entry["passed"] = entry["passed"] and not rep.skipped
    entry["secs"] += rep.duration


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        e = _OUTCOMES[number]
        if not e["seen"]:
            continue
        status = "PASS" if e["passed"] else "FAIL"
        note = f" | {_NOTES[number]}" if number in _NOTES else ""
        terminalreporter.write_line(f"criterion {number:2d} {status}  {e['title']} ({e['secs']:.1f}s){note}")


@pytest.fixture
def note():
    """Attach a short measurement to a criterion's summary line."""
    def add(number, text):
        _NOTES[number] = f"{_NOTES[number]}; {text}" if number in _NOTES else text
    return add


@pytest.fixture
def toy_model():
    """Three phones plus silence, 1-D, well-separated state means."""
    phones = ["A", "B", "C", "SIL"]
    means = np.array([[[-6.0], [-5.0], [-4.0]], [[0.0], [1.0], [2.0]], [[6.0], [7.0], [8.0]],
                      [[20.0], [20.0], [20.0]]])
    return single_gaussian_model(phones, means, 0.25)
