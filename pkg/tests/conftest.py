import contextlib
import time

import numpy as np
import pytest

from roadcsi import harness
from roadcsi.grid import GridConfig, build_pilot_grid


@pytest.fixture(scope="session")
def default_grid():
    return build_pilot_grid(GridConfig())


@pytest.fixture(scope="session")
def small_grid():
    return build_pilot_grid(GridConfig(n_subcarriers=48, pilot_spacing=6, n_pilot_symbols_per_capture=4, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def detection_run():
    """Calibrated detection scenario (5 backgrounds x with/without sedan, 1000 captures each)."""
    config = harness.default_detection_config()
    csis = harness.compute_csi(config)
    return config, csis, harness.detection_analysis(config, csis)


@pytest.fixture(scope="session")
def classification_run():
    """Calibrated 4-class scenario, 1000 captures per class, 500/500 split."""
    config = harness.default_classification_config()
    csis = harness.compute_csi(config)
    return config, csis, harness.classification_analysis(config, csis)


_ACCEPTANCE_LINES: list[str] = []


class Criterion:
    """Collects named sub-checks for one acceptance criterion."""

    def __init__(self, number: int, title: str, limit_s: float):
        self.number, self.title, self.limit_s = number, title, limit_s
        self.failures: list[str] = []

    def check(self, name: str, ok, detail: str = "") -> bool:
        ok = bool(ok)
        if not ok:
            self.failures.append(f"{name}" + (f" ({detail})" if detail else ""))
        return ok


@pytest.fixture
def criterion():
    @contextlib.contextmanager
    def run(number: int, title: str, limit_s: float):
        c = Criterion(number, title, limit_s)
        start = time.perf_counter()
        error = None
        try:
            yield c
        except Exception as exc:  # recorded, then re-raised below
            error = exc
            c.failures.append(f"raised {exc!r}")
        elapsed = time.perf_counter() - start
        c.check("runtime", elapsed < limit_s, f"{elapsed:.2f} s >= {limit_s:g} s")
        status = "PASS" if not c.failures else "FAIL"
        line = f"{status} criterion {number}: {title} [{elapsed:.2f} s, limit {limit_s:g} s]"
        if c.failures:
            line += " -- failed: " + "; ".join(c.failures)
        _ACCEPTANCE_LINES.append(line)
        print(line)
        if error is not None:
            raise error
        assert not c.failures, line

    return run


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
