import numpy as np
import pytest
from scipy import stats

from latnkm.config import ExperimentConfig
from latnkm.cpd import CpdModel, FeatureMapSpec, model_response, build_features
from latnkm.data import gen_cubic
from latnkm.inference import fit_bayes
from latnkm.oracle import GRADIENT_FD, finite_diff_gradient
from latnkm.predictive import (
    PredictiveDist,
    grad_f,
    interval,
    intervals,
    predict,
    predict_la,
    predict_lla,
    rescale,
)
from latnkm.errors import InvalidData


def small_post(rng, variant="ggn", N=25, D=3):
    X = rng.uniform(-1, 1, (N, D))
    y = np.sin(X.sum(axis=1)) + 0.1 * rng.standard_normal(N)
    c = ExperimentConfig(dataset="d.csv", rank=2, local_dim=3, epochs=15, vi_rounds=2, hessian=variant, threshold=1e-6)
    return fit_bayes(X, y, c), X


@pytest.fixture(scope="module")
def cubic_post():
    train, test = gen_cubic(0)
    cfg = ExperimentConfig(beta=1 / 9)
    return fit_bayes(train.X, train.y, cfg), train, test


class TestGradient:
    def test_matches_finite_differences(self, rng):
        for _ in range(10):
            D = int(rng.integers(1, 5))
            spec = FeatureMapSpec(3)
            model = CpdModel([rng.standard_normal((3, 2)) for _ in range(D)], spec)
            x = rng.uniform(-2, 2, D)
            f = lambda v: float(model_response(model.with_params(v), build_features(x[None, :], spec))[0])
            fd = finite_diff_gradient(f, model.params(), GRADIENT_FD)
            g = grad_f(model, x)
            assert np.all(np.abs(g - fd) <= 1e-6 * (1 + np.abs(g)))

    def test_single_core(self):
        spec = FeatureMapSpec(3)
        model = CpdModel([np.ones((3, 2))], spec)
        phi = build_features(np.array([[0.7]]), spec).phi[0][0]
        np.testing.assert_allclose(grad_f(model, np.array([0.7])), np.concatenate([phi, phi]), atol=1e-15)

    def test_zeroed_core(self, rng):
        spec = FeatureMapSpec(3)
        cores = [rng.standard_normal((3, 2)) for _ in range(3)]
        cores[1][:] = 0
        model = CpdModel(cores, spec)
        g = grad_f(model, np.array([0.3, -0.2, 0.9]))
        assert np.all(g[model.core_slice(0)] == 0) and np.all(g[model.core_slice(2)] == 0)
        assert np.any(g[model.core_slice(1)] != 0)

    def test_last_core_block(self, rng):
        model = CpdModel([rng.standard_normal((2, 2)) for _ in range(3)], FeatureMapSpec(2))
        x = np.array([0.1, 0.2, 0.3])
        np.testing.assert_array_equal(grad_f(model, x, "last"), grad_f(model, x)[model.core_slice(2)])


class TestLinearised:
    def test_mean_is_response(self, rng):
        post, X = small_post(rng)
        np.testing.assert_array_equal(predict_lla(post, X).mean, model_response(post.mean, build_features(X, post.feature_spec)))

    def test_noise_floor(self, rng):
        post, X = small_post(rng)
        d = predict_lla(post.rethreshold(1e30), X)
        np.testing.assert_allclose(d.variance, 1 / post.beta, rtol=1e-15)
        for v in ("ggn", "block", "diag", "last"):
            p, X = small_post(rng, v)
            assert np.all(predict_lla(p, X).variance >= 1 / p.beta)

    def test_variance_monotone_in_threshold(self, rng):
        post, X = small_post(rng)
        lam = post.diagnostics["lambda_max"]
        prev = None
        for t in (1e-8, 1e-4, 1e-2, 0.3, 2.0):
            v = predict_lla(post.rethreshold(t * lam), X).variance
            if prev is not None:
                assert np.all(v <= prev * (1 + 1e-12))
            prev = v

    def test_extrapolation_is_less_certain(self, cubic_post):
        post, _, _ = cubic_post
        var = predict_lla(post, np.array([[-5.0], [0.0], [5.0]])).variance
        assert var[1] < var[0] and var[1] < var[2]

    def test_closed_form_nll(self, rng):
        post, X = small_post(rng)
        y = rng.standard_normal(len(X))
        d = predict_lla(post, X)
        ref = -stats.norm.logpdf(y, d.mean, np.sqrt(d.variance))
        np.testing.assert_allclose(-d.logpdf(y), 0.5 * np.log(2 * np.pi * d.variance) + (y - d.mean) ** 2 / (2 * d.variance), rtol=0, atol=1e-12)
        np.testing.assert_allclose(-d.logpdf(y), ref, atol=1e-12)


class TestMonteCarlo:
    def test_empty_rank_is_plugin(self, rng):
        post, X = small_post(rng)
        p0 = post.rethreshold(1e30)
        la = predict_la(p0, X, S=7, seed=0)
        lla = predict_lla(p0, X)
        np.testing.assert_allclose(la.logpdf(lla.mean), lla.logpdf(lla.mean), atol=1e-12)

    def test_single_sample(self, rng):
        post, X = small_post(rng)
        la = predict_la(post, X, S=1, seed=4)
        assert la.n_components == 1
        g = PredictiveDist.gaussian(la.mean[:, 0], la.variance)
        y = rng.standard_normal(len(X))
        np.testing.assert_allclose(la.logpdf(y), g.logpdf(y), atol=1e-12)

    def test_deterministic(self, rng):
        post, X = small_post(rng)
        a, b = predict(post, X, "la", 20, 9), predict(post, X, "la", 20, 9)
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(interval(a, 0.9, seed=1)[0], interval(b, 0.9, seed=1)[0])


class TestIntervals:
    def test_standard_normal(self):
        lo, hi = interval(PredictiveDist.gaussian(0.0, 1.0), 0.95)
        np.testing.assert_allclose([lo[0], hi[0]], [-1.959964, 1.959964], atol=1e-6)

    def test_median_interval_centred(self):
        lo, hi = interval(PredictiveDist.gaussian(3.0, 4.0), 0.5)
        assert (lo + hi)[0] / 2 == pytest.approx(3.0, abs=1e-14)

    def test_one_component_mixture(self):
        lo, hi = interval(PredictiveDist.mixture([[0.0]], 1.0), 0.95, seed=0, n_draws=20000)
        assert abs(lo[0] + 1.959964) < 0.05 and abs(hi[0] - 1.959964) < 0.05

    def test_order_independent(self, rng):
        d = PredictiveDist.mixture(rng.standard_normal((6, 30)), rng.uniform(0.5, 2, 6))
        perm = rng.permutation(6)
        lo, hi = interval(d, 0.8, seed=3)
        lo_p, hi_p = interval(d[perm], 0.8, seed=3)
        np.testing.assert_array_equal(lo[perm], lo_p)
        np.testing.assert_array_equal(hi[perm], hi_p)
        lo_1, _ = interval(d[2], 0.8, seed=3)
        assert lo_1[0] == lo[2]

    def test_batch_levels_agree(self, rng):
        d = PredictiveDist.mixture(rng.standard_normal((4, 10)), 1.0)
        for a, (lo, hi) in zip((0.5, 0.9), intervals(d, (0.5, 0.9), seed=2)):
            np.testing.assert_array_equal(lo, interval(d, a, seed=2)[0])

    def test_bad_level(self):
        with pytest.raises(ValueError):
            interval(PredictiveDist.gaussian(0.0, 1.0), 1.0)

    def test_nonpositive_variance(self):
        with pytest.raises(InvalidData):
            PredictiveDist.gaussian([0.0], [0.0])

    def test_rescale(self):
        d = rescale(PredictiveDist.gaussian([1.0], [2.0]), 10.0, 3.0)
        assert d.mean[0] == 13.0 and d.variance[0] == 18.0
