import numpy as np
import pytest

from actionfeat.datamodel import DegenerateInputError, DescriptorMatrix
from actionfeat.reduce import PcaModel, apply_pca, fit_pca, load_pca, save_pca


def _dm(a):
    return DescriptorMatrix(np.asarray(a, dtype=np.float64))


def test_line_y_eq_2x_oracle():
    # points on y = 2x: first principal direction parallel to (1, 2)/sqrt(5),
    # checked against a direct eigendecomposition of the 2x2 covariance
    t = np.linspace(-3.0, 3.0, 25)
    X = np.stack([t, 2.0 * t + 1.0], axis=1)
    model = fit_pca(_dm(X), 1)

    cov = np.cov(X, rowvar=False, bias=True)
    evals, evecs = np.linalg.eigh(cov)
    lead = evecs[:, np.argmax(evals)]
    lead = lead * np.sign(lead[np.argmax(np.abs(lead))])

    np.testing.assert_allclose(model.basis[:, 0], lead, atol=1e-12)
    np.testing.assert_allclose(model.basis[:, 0], np.array([1.0, 2.0]) / np.sqrt(5.0), atol=1e-12)

    # projected variance equals total variance (all variance on the line)
    proj = apply_pca(model, _dm(X)).values
    assert abs(proj.var() - np.trace(cov)) < 1e-9


def test_fc6_shape_reduction(rng):
    X = rng.standard_normal((300, 4096))
    model = fit_pca(DescriptorMatrix(X), 256)
    assert model.input_dim == 4096 and model.output_dim == 256
    out = apply_pca(model, DescriptorMatrix(X[:5]))
    assert out.dim == 256


def test_full_basis_is_isometry(rng):
    X = rng.standard_normal((40, 6))
    model = fit_pca(DescriptorMatrix(X), 6)
    Y = apply_pca(model, DescriptorMatrix(X)).values
    dx = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    dy = np.linalg.norm(Y[:, None, :] - Y[None, :, :], axis=2)
    np.testing.assert_allclose(dx, dy, atol=1e-6)


def test_full_basis_reconstruction(rng):
    X = rng.standard_normal((30, 5))
    model = fit_pca(DescriptorMatrix(X), 5)
    Y = apply_pca(model, DescriptorMatrix(X)).values
    back = Y @ model.basis.T + model.mean
    assert np.max(np.abs(back - X)) < 1e-6


def test_mean_row_projects_to_zero(rng):
    X = rng.standard_normal((20, 4))
    model = fit_pca(DescriptorMatrix(X), 2)
    out = apply_pca(model, _dm(model.mean[None, :])).values
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_projection_centered_and_decorrelated(rng):
    X = rng.standard_normal((200, 8)) @ rng.standard_normal((8, 8))
    model = fit_pca(DescriptorMatrix(X), 5)
    Y = apply_pca(model, DescriptorMatrix(X)).values
    np.testing.assert_allclose(Y.mean(axis=0), 0.0, atol=1e-9)
    cov = (Y.T @ Y) / Y.shape[0]
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) < 1e-6


def test_explained_variance_nonincreasing(rng):
    X = rng.standard_normal((100, 10)) * np.arange(1, 11)
    model = fit_pca(DescriptorMatrix(X), 10)
    assert np.all(np.diff(model.explained_variance) <= 1e-12)


def test_basis_orthonormal(rng):
    X = rng.standard_normal((50, 7))
    model = fit_pca(DescriptorMatrix(X), 4)
    gram = model.basis.T @ model.basis
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)


def test_target_dim_out_of_range(rng):
    X = rng.standard_normal((5, 3))
    with pytest.raises(ValueError):
        fit_pca(DescriptorMatrix(X), 4)  # p > d
    with pytest.raises(ValueError):
        fit_pca(DescriptorMatrix(X), 0)
    with pytest.raises(ValueError):
        fit_pca(DescriptorMatrix(np.zeros((2, 3))), 2)  # p > rows - 1


def test_zero_variance_degenerate():
    X = np.ones((10, 3))
    with pytest.raises(DegenerateInputError):
        fit_pca(_dm(X), 1)


def test_dimension_mismatch_on_apply(rng):
    X = rng.standard_normal((10, 4))
    model = fit_pca(DescriptorMatrix(X), 2)
    with pytest.raises(ValueError):
        apply_pca(model, DescriptorMatrix(rng.standard_normal((3, 5))))


def test_whitening_gives_unit_variance(rng):
    X = rng.standard_normal((500, 6)) * np.array([5.0, 3.0, 2.0, 1.0, 0.5, 0.25])
    model = fit_pca(DescriptorMatrix(X), 4, whiten=True)
    Y = apply_pca(model, DescriptorMatrix(X)).values
    np.testing.assert_allclose(Y.var(axis=0, ddof=1), 1.0, atol=1e-6)
    # basis itself stays orthonormal; whitening lives in the separate scale
    np.testing.assert_allclose(model.basis.T @ model.basis, np.eye(4), atol=1e-10)


def test_save_load_roundtrip(tmp_path, rng):
    X = rng.standard_normal((60, 9))
    model = fit_pca(DescriptorMatrix(X), 5)
    p = tmp_path / "pca.bin"
    save_pca(p, model)
    back = load_pca(p)
    assert isinstance(back, PcaModel)
    # float32 on disk
    np.testing.assert_allclose(back.mean, model.mean, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(back.basis, model.basis, rtol=1e-5, atol=1e-6)
    # reload of the persisted model is exact
    save_pca(tmp_path / "pca2.bin", back)
    back2 = load_pca(tmp_path / "pca2.bin")
    np.testing.assert_array_equal(back2.basis, back.basis)


def test_deterministic_given_samples(rng):
    X = rng.standard_normal((80, 6))
    a = fit_pca(DescriptorMatrix(X), 3, seed=0)
    b = fit_pca(DescriptorMatrix(X), 3, seed=99)  # seed does not perturb exact fit
    np.testing.assert_array_equal(a.basis, b.basis)
