"""End-to-end acceptance checks.

Each test prints one summary line per check (run pytest with ``-s`` or read
the captured output) and asserts the recorded threshold.  The square-domain
profile comparison (3a) is expected to fail: the closed-form growth-law
profile is flat across the source edge while the variational flow is peaked
there, and the gap does not shrink under mesh/step refinement.
"""

import numpy as np
import pytest

from plapflow import suite


def _emit(records):
    for r in records:
        print(r.line())


@pytest.fixture(scope="module")
def crit1():
    recs, traj = suite.criterion_1()
    return recs, traj


@pytest.fixture(scope="module")
def crit4():
    recs, sweep = suite.criterion_4()
    return recs, sweep


def test_criterion_1_two_point_closed_form(crit1):
    recs, _ = crit1
    _emit(recs)
    assert all(r.passed for r in recs)
    assert all(r.runtime_s < 5.0 for r in recs)


def test_criterion_2_slope_change_detection():
    recs = suite.criterion_2()
    _emit(recs)
    assert all(r.passed for r in recs)
    assert all(r.runtime_s < 5.0 for r in recs)


@pytest.fixture(scope="module")
def crit3():
    return suite.criterion_3()


def test_criterion_3a_profile_comparison(crit3):
    rec = crit3[0]
    _emit([rec])
    assert rec.passed, (
        "the simulated flow does not match the flat growth-law profile: "
        f"Linf difference {rec.measured:.4f} (threshold {rec.threshold}); "
        "the difference is structural and refinement-invariant -- see the "
        "note in the ledger and README"
    )


def test_criterion_3b_mass_identity(crit3):
    rec = crit3[1]
    _emit([rec])
    assert rec.passed


def test_criterion_3c_uniform_speed(crit3):
    rec = crit3[2]
    _emit([rec])
    assert rec.passed


def test_criterion_3_runtime(crit3):
    assert sum(r.runtime_s for r in crit3) < 180.0


def test_criterion_4_p_sweep(crit4):
    recs, _ = crit4
    _emit(recs)
    assert all(r.passed for r in recs)
    assert all(r.runtime_s < 120.0 for r in recs)


def test_criterion_5_resolvent_ladder():
    recs = suite.criterion_5()
    _emit(recs)
    assert all(r.passed for r in recs)


def test_criterion_6_duality(crit1):
    _, traj1 = crit1
    recs = suite.criterion_6(traj1=traj1)
    _emit(recs)
    assert all(r.passed for r in recs)


def test_criterion_7_apriori_bounds(crit4):
    _, sweep = crit4
    recs = suite.criterion_7(sweep)
    _emit(recs)
    assert all(r.passed for r in recs)


def test_criterion_8_property_suites():
    recs = suite.criterion_8(seed=suite.DEFAULT_SEED, cases=100)
    _emit(recs)
    assert all(r.passed for r in recs)
    assert sum(r.runtime_s for r in recs) < 180.0


def test_suite_report_format():
    rec = suite.CriterionRecord(name="demo", measured=0.5, threshold=1.0,
                                comparison="<=", passed=True, runtime_s=0.1)
    line = rec.line()
    assert line.startswith("[PASS] demo")
    assert suite.format_report([rec]).endswith("1/1 checks passed")
