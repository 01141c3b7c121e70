import numpy as np
import pytest

from latnkm import als, inference
from latnkm.cpd import CpdModel, FeatureMapSpec, build_features

# every ALS run in the session is checked for monotone descent
ALS_RUNS = {"count": 0, "violations": []}


def descent_violations(trace):
    return [i for i in range(1, len(trace)) if trace[i] > trace[i - 1] + 1e-9 * (1 + abs(trace[i - 1]))]


@pytest.fixture(autouse=True)
def _check_als_descent(monkeypatch, request):
    original = als.run_als
    bad = []

    def checked(*args, **kwargs):
        est = original(*args, **kwargs)
        ALS_RUNS["count"] += 1
        if descent_violations(est.loss_trace):
            bad.append(est.loss_trace)
            ALS_RUNS["violations"].append(request.node.nodeid)
        return est

    monkeypatch.setattr(als, "run_als", checked)
    monkeypatch.setattr(inference, "run_als", checked)
    yield
    assert not bad, f"{len(bad)} ALS run(s) increased the loss"


def pytest_terminal_summary(terminalreporter):
    n, v = ALS_RUNS["count"], ALS_RUNS["violations"]
    terminalreporter.write_line(f"ALS descent check: {n} runs, {len(v)} with a loss increase")


def random_instance(rng, D, I, R, N, noise=0.3):
    """Random model, unit-norm features of random inputs, and noisy targets."""
    spec = FeatureMapSpec(I)
    X = rng.uniform(-2, 2, size=(N, D))
    fs = build_features(X, spec)
    model = CpdModel([rng.standard_normal((I, R)) for _ in range(D)], spec)
    y = rng.standard_normal(N) * noise + rng.standard_normal()
    return model, fs, y, X


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
