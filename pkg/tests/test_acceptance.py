"""Acceptance battery: every criterion at its stated tolerance, full profile."""

import pytest

from starkscat import acceptance as acc
from starkscat.config import ExperimentConfig
from starkscat.potentials import gaussian, zero

from conftest import CRITERION_LINES

FULL = ExperimentConfig(profile="full")


def _record(result, tag=""):
    line = result.line() + (f" [{tag}]" if tag else "")
    CRITERION_LINES.append(line)
    print(line)
    return result


@pytest.mark.parametrize("criterion", acc.CRITERIA, ids=lambda c: f"{c.number:02d}-{c.__name__}")
def test_criterion(criterion):
    result = _record(criterion(FULL))
    assert result.status == "pass", result.line()
    if result.limit is not None:
        assert result.runtime <= result.limit


@pytest.mark.parametrize("q", [zero(), gaussian()], ids=["zero", "gaussian"])
def test_quick_suite_other_potentials(q):
    cfg = ExperimentConfig(potential=q, profile="quick")
    results = [_record(r, q.family) for r in acc.run_suite(cfg)]
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]
    assert results[10].status == "skip"
