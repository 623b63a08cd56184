import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from em_maslov import app
from em_maslov.config import gallery_config

settings.register_profile("suite", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")

_PIPELINES: dict = {}
_REPORTS: dict = {}
ACCEPTANCE_KEY = pytest.StashKey[list]()


def pipeline(name: str, T=None) -> app.Pipeline:
    key = (name, T)
    if key not in _PIPELINES:
        _PIPELINES[key] = app.prepare(gallery_config(name), T)
    return _PIPELINES[key]


def report(name: str) -> app.IndexReport:
    if name not in _REPORTS:
        _REPORTS[name] = app.run_report(gallery_config(name), pipeline=pipeline(name))
    return _REPORTS[name]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log(request):
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def log(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
