import json
from pathlib import Path

import pytest

from polarfluor import scenario

FROZEN = Path(__file__).with_name("data") / "frozen.json"

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

_RUNS: dict = {}


def cached_run(key, cfg, **kw):
    """Run a scenario once per session; full-scale spectra are expensive."""
    if key not in _RUNS:
        _RUNS[key] = scenario.run_scenario(cfg, **kw)
    return _RUNS[key]


@pytest.fixture(scope="session")
def frozen():
    return json.loads(FROZEN.read_text())


@pytest.fixture(scope="session")
def run():
    return cached_run


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
