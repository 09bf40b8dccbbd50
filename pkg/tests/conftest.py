import time
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "advsac", derandomize=True, deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("advsac")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class AcceptanceLog:
    """Collects one verdict line per acceptance criterion for the summary."""

    def __init__(self):
        self.lines = {}

    @contextmanager
    def criterion(self, number, title):
        result = {"ok": False, "detail": ""}
        t0 = time.perf_counter()
        try:
            yield result
        except BaseException as exc:
            result["ok"] = False
            result["detail"] = f"error {type(exc).__name__}: {exc}"
            raise
        finally:
            verdict = "PASS" if result["ok"] else "FAIL"
            line = f"criterion {number:>2} {verdict}  {title}: {result['detail']} [{time.perf_counter() - t0:.1f}s]"
            self.lines[number] = line
            print(line)


_LOG = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance():
    return _LOG


def pytest_terminal_summary(terminalreporter):
    if _LOG.lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(_LOG.lines):
            terminalreporter.write_line(_LOG.lines[n])
