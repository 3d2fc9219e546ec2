"""Acceptance gate: one test per numbered criterion, run at full level.

Each test prints a single PASS/FAIL/WARN line with the measured numbers
and asserts the verdict. Criterion 3 is a known red on this problem
family: the kernel operator's measured condition numbers sit far from
the pinned target at every stated dimension, and the test reports the
measured values instead of papering over them.
"""

from __future__ import annotations

import pytest

from mpir import CheckCache, run_checks


@pytest.fixture(scope="module")
def cache():
    return CheckCache()


def _run_criterion(number: int, cache: CheckCache) -> None:
    results = run_checks(level="full", criteria=[number], cache=cache)
    assert len(results) == 1
    res = results[0]
    status = "WARN" if res.warned else ("PASS" if res.passed else "FAIL")
    print(f"criterion {res.number:02d} {status} {res.name}: {res.detail}")
    assert res.passed, f"criterion {res.number} ({res.name}): {res.detail}"


def test_criterion_01_iteration_counts_widening(cache):
    _run_criterion(1, cache)


def test_criterion_02_iteration_counts_narrowing(cache):
    _run_criterion(2, cache)


def test_criterion_03_condition_number(cache):
    _run_criterion(3, cache)


def test_criterion_04_promoted_pair(cache):
    _run_criterion(4, cache)


def test_criterion_05_widening_solve_equivalence(cache):
    _run_criterion(5, cache)


def test_criterion_06_narrowing_solve_scale_invariance(cache):
    _run_criterion(6, cache)


def test_criterion_07_error_bound(cache):
    _run_criterion(7, cache)


def test_criterion_08_dominant_eigenvalue(cache):
    _run_criterion(8, cache)


def test_criterion_09_transfer_counts(cache):
    _run_criterion(9, cache)


def test_criterion_10_timing_direction(cache):
    _run_criterion(10, cache)


def test_criterion_11_determinism(cache):
    _run_criterion(11, cache)
