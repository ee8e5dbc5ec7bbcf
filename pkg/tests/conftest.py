import json
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def frozen():
    """Oracle values produced by scripts/freeze_oracles.py."""
    return json.loads((DATA / "oracle_values.json").read_text())


def low_rank_instance(p, r, seed, noise=0.0):
    """Random rank-r PSD matrix plus an optional noise floor."""
    u = np.random.default_rng(seed).normal(size=(p, r))
    return u @ u.T + noise * np.eye(p), u


def chained_observation(cov, node_sets):
    from graphquilt import BlockDesign, ObservedCovariance

    design = BlockDesign(tuple(np.asarray(v) for v in node_sets), None,
                         cov.shape[0])
    return ObservedCovariance.from_full(cov, design)


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "acceptance: acceptance suite")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        passed = call.excinfo is None
        _CRITERIA[number] = (title, passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}")
