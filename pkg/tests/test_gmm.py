import numpy as np
import pytest

from actionfeat.datamodel import DescriptorMatrix
from actionfeat.gmm import (
    GmmModel,
    avg_log_likelihood,
    em_fit,
    fit_gmm,
    load_gmm,
    posteriors,
    save_gmm,
)


def _dm(a):
    return DescriptorMatrix(np.asarray(a, dtype=np.float64))


def _density(x, mean, var):
    return np.prod(np.exp(-((x - mean) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var))


def test_k1_recovers_sample_moments(rng):
    X = rng.standard_normal((400, 3)) * 2.0 + 5.0
    model = fit_gmm(DescriptorMatrix(X), 1, seed=0)
    assert model.priors[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(model.means[0], X.mean(axis=0), atol=1e-9)
    np.testing.assert_allclose(model.variances[0], X.var(axis=0), atol=1e-9)


def test_two_population_recovery():
    gen = np.random.default_rng(7)
    a = gen.normal(0.0, 0.1, size=(300, 1))
    b = gen.normal(10.0, 0.1, size=(200, 1))
    X = np.vstack([a, b])
    model = fit_gmm(_dm(X), 2, seed=0)
    means = np.sort(model.means.ravel())
    np.testing.assert_allclose(means, [0.0, 10.0], atol=0.2)
    props = np.sort(model.priors)
    np.testing.assert_allclose(props, [200 / 500, 300 / 500], atol=0.1)


def test_posteriors_k1_all_ones(rng):
    X = rng.standard_normal((20, 4))
    model = fit_gmm(DescriptorMatrix(X), 1, seed=0)
    q = posteriors(model, DescriptorMatrix(X))
    np.testing.assert_allclose(q, 1.0, atol=1e-15)


def test_posterior_dominant_mode():
    model = GmmModel(
        priors=np.array([0.5, 0.5]),
        means=np.array([[0.0, 0.0], [100.0, 100.0]]),
        variances=np.ones((2, 2)),
    )
    q = posteriors(model, _dm([[100.0, 100.0]]))
    assert q[0, 1] > 0.99


def test_posteriors_match_bruteforce_densities(rng):
    # n=5, K=3, d=2 against direct density-ratio evaluation
    for _ in range(20):
        model = GmmModel(
            priors=rng.dirichlet(np.ones(3)),
            means=rng.standard_normal((3, 2)) * 2,
            variances=rng.uniform(0.2, 2.0, size=(3, 2)),
        )
        X = rng.standard_normal((5, 2)) * 2
        q = posteriors(model, DescriptorMatrix(X))
        for i in range(5):
            dens = np.array(
                [model.priors[k] * _density(X[i], model.means[k], model.variances[k])
                 for k in range(3)]
            )
            np.testing.assert_allclose(q[i], dens / dens.sum(), atol=1e-12)


def test_posterior_rows_sum_to_one(rng):
    X = rng.standard_normal((50, 6)) * 10
    model = fit_gmm(DescriptorMatrix(X), 4, seed=1)
    q = posteriors(model, DescriptorMatrix(X))
    np.testing.assert_allclose(q.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(q >= 0)


def test_loglikelihood_nondecreasing(rng):
    for trial in range(10):
        X = rng.standard_normal((120, 3)) + rng.integers(0, 3) * 2.0
        _, history = em_fit(DescriptorMatrix(X), 3, seed=trial, max_iter=25)
        assert all(b >= a - 1e-9 for a, b in zip(history, history[1:]))


def test_avg_log_likelihood_matches_density(rng):
    model = GmmModel(
        priors=np.array([0.25, 0.75]),
        means=np.array([[0.0], [4.0]]),
        variances=np.array([[1.0], [0.5]]),
    )
    X = rng.standard_normal((7, 1))
    expected = np.mean(
        [np.log(sum(model.priors[k] * _density(x, model.means[k], model.variances[k])
                    for k in range(2))) for x in X]
    )
    assert avg_log_likelihood(model, DescriptorMatrix(X)) == pytest.approx(expected, abs=1e-12)


def test_variances_floored_strictly_positive():
    X = np.repeat(np.array([[1.0, 2.0], [1.0, 2.0], [3.0, 2.0], [5.0, 2.0]]), 4, axis=0)
    model = fit_gmm(_dm(X), 2, seed=0)  # second column constant
    assert np.all(model.variances > 0)


def test_rows_fewer_than_k(rng):
    with pytest.raises(ValueError):
        fit_gmm(DescriptorMatrix(rng.standard_normal((2, 2))), 3, seed=0)


def test_dimension_mismatch(rng):
    model = fit_gmm(DescriptorMatrix(rng.standard_normal((30, 3))), 2, seed=0)
    with pytest.raises(ValueError):
        posteriors(model, DescriptorMatrix(rng.standard_normal((4, 5))))


def test_deterministic_fit(rng):
    X = rng.standard_normal((200, 4))
    a = fit_gmm(DescriptorMatrix(X), 3, seed=5)
    b = fit_gmm(DescriptorMatrix(X), 3, seed=5)
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.priors, b.priors)
    np.testing.assert_array_equal(a.variances, b.variances)


def test_priors_validation():
    with pytest.raises(ValueError):
        GmmModel(priors=np.array([0.6, 0.6]), means=np.zeros((2, 1)),
                 variances=np.ones((2, 1)))
    with pytest.raises(ValueError):
        GmmModel(priors=np.array([0.5, 0.5]), means=np.zeros((2, 1)),
                 variances=np.array([[1.0], [0.0]]))


def test_save_load_roundtrip(tmp_path, rng):
    X = rng.standard_normal((150, 3)) * 3
    model = fit_gmm(DescriptorMatrix(X), 4, seed=2)
    p = tmp_path / "gmm.bin"
    save_gmm(p, model)
    back = load_gmm(p)
    assert abs(back.priors.sum() - 1.0) < 1e-12  # renormalized on load
    np.testing.assert_allclose(back.means, model.means, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(back.variances, model.variances, rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(back.priors, model.priors, rtol=1e-5, atol=1e-7)
