import logging
import zlib

import numpy as np
import pytest


class AlsWatch(logging.Handler):
    """Counts ALS micro-steps and objective increases across the whole session."""

    def __init__(self):
        super().__init__(level=logging.DEBUG)
        self.runs = 0
        self.micro_steps = 0
        self.violations = 0

    def emit(self, record):
        if record.msg.startswith("ALS objective increased"):
            self.violations += 1
        elif record.msg.startswith("ALS run finished"):
            self.runs += 1
            self.micro_steps += record.args[0]


ALS_WATCH = AlsWatch()
_als_logger = logging.getLogger("tensor_recovery.recovery")
_als_logger.addHandler(ALS_WATCH)
_als_logger.setLevel(logging.DEBUG)

CRITERIA = {}


def pytest_collection_modifyitems(config, items):
    last = [item for item in items if item.get_closest_marker("run_last")]
    rest = [item for item in items if not item.get_closest_marker("run_last")]
    items[:] = rest + last


def pytest_configure(config):
    config.addinivalue_line("markers", "run_last: run after every other test")
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")
    config.addinivalue_line("markers", "acceptance: acceptance criteria module")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        number, text = marker.args
        CRITERIA[number] = (text, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        text, outcome = CRITERIA[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {text}")


TABLE_SEED = 2025
TABLE_GRIDS = {(1, 1, 1): (3.0, 9.0, 12.0), (2, 2, 2): (6.0, 23.0), (3, 3, 3): (10.0, 24.0)}
_TABLE_CACHE = {}


def table_row(rank):
    """Desk-scale sweep of one 10x10x10 Gaussian row, computed once per session."""
    from tensor_recovery.experiments import ExperimentSpec, run_sweep

    if rank not in _TABLE_CACHE:
        spec = ExperimentSpec(shape=(10, 10, 10), rank=rank, grid=TABLE_GRIDS[rank], trials=20, seed=TABLE_SEED)
        _TABLE_CACHE[rank] = run_sweep(spec)
    return _TABLE_CACHE[rank]


@pytest.fixture(scope="session")
def table_row_111():
    return table_row((1, 1, 1))


@pytest.fixture
def rng(request):
    # stable per-test seed
    return np.random.default_rng(zlib.crc32(request.node.nodeid.encode()))
