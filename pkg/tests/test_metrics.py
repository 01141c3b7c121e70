import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latnkm.metrics import (
    RCE_LEVELS,
    calibration_error,
    coverage,
    evaluate,
    interval_coverage,
    nll,
    rce,
    rmse,
    wcpi,
)
from latnkm.predictive import PredictiveDist


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [1.0, -1.0]) == 1.0
    with pytest.raises(ValueError):
        rmse([], [])


def test_nll_examples():
    y = np.array([0.3, -1.0, 2.0])
    assert nll(PredictiveDist.gaussian(y, 1.0), y) == pytest.approx(0.5 * np.log(2 * np.pi), abs=1e-15)
    assert nll(PredictiveDist.gaussian(y, 0.25), y) == pytest.approx(0.5 * np.log(2 * np.pi * 0.25), abs=1e-15)


def test_mixture_with_one_component_matches_gaussian(rng):
    m, v, y = rng.standard_normal(5), rng.uniform(0.1, 2, 5), rng.standard_normal(5)
    assert nll(PredictiveDist.mixture(m[:, None], v), y) == pytest.approx(nll(PredictiveDist.gaussian(m, v), y), abs=1e-12)


def test_mixture_nll_is_stable():
    d = PredictiveDist.mixture([[0.0, 1e3]], 1e-4)
    assert np.isfinite(nll(d, [1e3]))


def test_coverage_examples():
    d = PredictiveDist.gaussian(np.zeros(4), 1.0)
    assert coverage(d, np.zeros(4)) == 1.0
    assert wcpi(d) == pytest.approx(2 * 1.959963984540054, abs=1e-12)
    assert coverage(PredictiveDist.gaussian(np.zeros(3), 1e12), [5.0, -40.0, 1e3]) == 1.0


def test_rce_all_covering():
    d = PredictiveDist.gaussian(np.zeros(3), 1e12)
    assert rce(d, [1.0, 2.0, 3.0]) == pytest.approx(0.275, abs=1e-12)
    assert len(RCE_LEVELS) == 10 and RCE_LEVELS[0] == 0.5 and RCE_LEVELS[-1] == 0.95


def test_rce_calibrated_stream():
    assert calibration_error([(a, a) for a in RCE_LEVELS]) == 0.0


def test_gaussian_stream_is_roughly_calibrated(rng):
    y = rng.standard_normal(20000)
    assert rce(PredictiveDist.gaussian(np.zeros_like(y), 1.0), y) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    d = PredictiveDist.mixture(rng.standard_normal((8, 5)), rng.uniform(0.2, 1.5, 8))
    y = rng.standard_normal(8)
    p = rng.permutation(8)
    assert coverage(d, y, 0.9) == coverage(d[p], y[p], 0.9)
    assert rce(d, y) == rce(d[p], y[p])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 10.0))
def test_widening_increases_width(c):
    lo, hi = np.array([-1.0, 0.0]), np.array([1.0, 3.0])
    assert np.mean((hi + c / 2) - (lo - c / 2)) == pytest.approx(np.mean(hi - lo) + c)
    assert interval_coverage([2.0, 3.5], lo - c / 2, hi + c / 2) >= interval_coverage([2.0, 3.5], lo, hi)


def test_evaluate_report(rng):
    y = rng.standard_normal(50)
    rep = evaluate(PredictiveDist.gaussian(np.zeros(50), 1.0), y)
    assert 0 <= rep.ecp95 <= 1 and rep.wcpi95 > 0 and rep.rce >= 0
    assert [a for a, _ in rep.coverage_table] == list(RCE_LEVELS)
    assert set(rep.scalars()) == {"rmse", "nll", "ecp95", "wcpi95", "rce"}
