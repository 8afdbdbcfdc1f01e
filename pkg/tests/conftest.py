import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from crossclass.synth import GenConfig, generate_stack  # noqa: E402

ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture(scope="session")
def small_stack():
    """A quick 8x48x48 phantom shared across tests."""
    cfg = GenConfig(z=8, y=48, x=48, n_objects=6, mean_radius=4.0, rng_seed=3)
    gt, elev = generate_stack(cfg)
    return cfg, gt, elev


@pytest.fixture(scope="session")
def default_stack():
    cfg = GenConfig()
    gt, elev = generate_stack(cfg)
    return cfg, gt, elev


def pytest_runtest_logreport(report):
    crit = None
    for mark in getattr(report, "keywords", {}):
        if mark.startswith("criterion_"):
            crit = int(mark.split("_")[1])
    if crit is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    ACCEPTANCE_RESULTS[crit] = (report.passed, report.nodeid)


def pytest_configure(config):
    for i in range(1, 10):
        config.addinivalue_line("markers", f"criterion_{i}: acceptance criterion {i}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE_RESULTS):
        ok, nodeid = ACCEPTANCE_RESULTS[crit]
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  ({nodeid.split('::')[-1]})")
