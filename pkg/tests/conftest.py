import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.register_profile("fast", max_examples=10, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (criterion, label) -> (passed, detail); filled by the acceptance suite
ACCEPTANCE: dict[tuple[str, str], tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    by_crit: dict[str, list[bool]] = {}
    for (crit, label), (ok, detail) in sorted(ACCEPTANCE.items(), key=lambda kv: _order(kv[0])):
        by_crit.setdefault(crit, []).append(ok)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {crit:<4} {label}: {detail}")
    tr.write_line("")
    for crit in sorted(by_crit, key=lambda c: _order((c, ""))):
        oks = by_crit[crit]
        tr.write_line(f"criterion {crit}: {'PASS' if all(oks) else 'FAIL'} ({sum(oks)}/{len(oks)} checks)")


def _order(key):
    crit, label = key
    return (int(crit.lstrip("C")), label)


@pytest.fixture
def record():
    def _record(crit: str, label: str, ok: bool, detail: str = ""):
        ACCEPTANCE[(crit, label)] = (bool(ok), detail)
        return bool(ok)

    return _record


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
