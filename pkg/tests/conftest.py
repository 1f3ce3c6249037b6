"""Shared test setup: kernel warmup, cache hygiene, and the acceptance
pass/fail banner (one line per criterion, printed as each finishes)."""

import re

import pytest

import fpwb.kernels
import fpwb.session


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile/warm the batch kernels once so no test pays first-call cost
    inside a timed section."""
    fpwb.kernels.warmup()
    yield


@pytest.fixture()
def clean_caches():
    """Empty sample cache and zeroed counters around a test that measures
    cache behavior."""
    import fpwb.analysis
    import fpwb.oracle
    import fpwb.sampler

    fpwb.session.clear_sample_cache()
    fpwb.oracle.reset_counters()
    fpwb.sampler.reset_counters()
    fpwb.analysis.reset_counters()
    yield
    fpwb.session.clear_sample_cache()


_ACCEPTANCE_TEST = re.compile(r"test_acceptance\.py::test_c(\d+)")


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    m = _ACCEPTANCE_TEST.search(report.nodeid)
    if not m:
        return
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] C{int(m.group(1))} {status}", flush=True)
