"""Shared fixtures and a session-wide runtime lower-bound audit.

Every `EvolutionResult` built during the session passes through
`hblab.evolution._finalize`; the wrapper below records
(tau, success amplitude, tau_lower) so the session can assert that no run
ever reaches amplitude 1/5 before the lower bound.
"""
import os

import numpy as np
import pytest
from hypothesis import settings, HealthCheck

import hblab.evolution as evo
from hblab.bounds import SoundnessLog

settings.register_profile(
    "default", deadline=None, max_examples=25, print_blob=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

AUDIT = SoundnessLog()
_original_finalize = evo._finalize


def _audited_finalize(instance, state, tau, steps, mode, err=0.0, degraded=False):
    res = _original_finalize(instance, state, tau, steps, mode, err, degraded)
    AUDIT.check(instance, res)
    return res


evo._finalize = _audited_finalize


def pytest_sessionfinish(session, exitstatus):
    n = len(AUDIT.records)
    bad = AUDIT.violations
    tr = session.config.pluginmanager.get_plugin("terminalreporter")
    if tr is not None:
        tr.write_line(f"runtime lower-bound audit: {n} runs checked, {len(bad)} violations")
    if bad:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])


@pytest.fixture(scope="session")
def audit():
    return AUDIT


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
