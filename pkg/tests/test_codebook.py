import itertools

import numpy as np
import pytest

from actionfeat.codebook import (
    Codebook,
    assign,
    assign_all,
    fit_kmeans,
    lloyd_iterations,
    load_codebook,
    save_codebook,
)
from actionfeat.datamodel import DescriptorMatrix


def _dm(a):
    return DescriptorMatrix(np.asarray(a, dtype=np.float64))


def test_singleton_clusters_recover_points(rng):
    pts = rng.standard_normal((6, 3)) * 10.0
    cb = fit_kmeans(_dm(pts), 6, seed=0)
    # centers equal the points as a set
    dist = np.linalg.norm(cb.centers[:, None, :] - pts[None, :, :], axis=2)
    assert np.max(dist.min(axis=1)) < 1e-9
    assert np.max(dist.min(axis=0)) < 1e-9


def _best_two_partition_sse(pts):
    """Exhaustive minimum within-cluster SSE over all 2-partitions."""
    n = len(pts)
    best = np.inf
    best_means = None
    for bits in itertools.product([0, 1], repeat=n):
        bits = np.array(bits)
        if bits.sum() in (0, n):
            continue
        sse = 0.0
        means = []
        for b in (0, 1):
            grp = pts[bits == b]
            mu = grp.mean(axis=0)
            means.append(mu)
            sse += ((grp - mu) ** 2).sum()
        if sse < best:
            best, best_means = sse, np.stack(means)
    return best, best_means


def test_two_blobs_vs_exhaustive_partition(rng):
    blob_a = rng.standard_normal((6, 2)) * 0.3
    blob_b = rng.standard_normal((6, 2)) * 0.3 + 10.0
    pts = np.vstack([blob_a, blob_b])
    cb = fit_kmeans(_dm(pts), 2, seed=3)
    best_sse, best_means = _best_two_partition_sse(pts)

    labels = assign_all(cb, pts)
    sse = sum(((pts[labels == i] - cb.centers[i]) ** 2).sum() for i in range(2))
    assert sse <= best_sse + 1e-9  # k-means found the global optimum here

    order = np.argsort(cb.centers[:, 0])
    ref = best_means[np.argsort(best_means[:, 0])]
    np.testing.assert_allclose(cb.centers[order], ref, atol=0.5)


def test_k256_center_count(rng):
    X = rng.standard_normal((2000, 8))
    cb = fit_kmeans(DescriptorMatrix(X), 256, seed=0, max_iter=5)
    assert cb.k == 256 and cb.dim == 8
    # fitted centers pairwise distinct
    d2 = ((cb.centers[:, None, :] - cb.centers[None, :, :]) ** 2).sum(axis=2)
    d2[np.diag_indices(256)] = np.inf
    assert d2.min() > 1e-12


def test_assign_exact_center():
    centers = np.arange(12, dtype=np.float64).reshape(4, 3)
    cb = Codebook(centers=centers)
    assert assign(cb, centers[3]) == 3


def test_assign_tie_breaks_low_index():
    cb = Codebook(centers=np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert assign(cb, np.array([1.0, 0.0])) == 0
    cb2 = Codebook(centers=np.array([[2.0, 0.0], [0.0, 0.0]]))
    assert assign(cb2, np.array([1.0, 0.0])) == 0


def test_assign_matches_bruteforce(rng):
    centers = rng.standard_normal((17, 5))
    cb = Codebook(centers=centers)
    for _ in range(100):
        x = rng.standard_normal(5)
        brute = int(np.argmin([np.sum((x - c) ** 2) for c in centers]))
        assert assign(cb, x) == brute


def test_assign_all_matches_assign(rng):
    centers = rng.standard_normal((9, 4))
    cb = Codebook(centers=centers)
    X = rng.standard_normal((50, 4))
    labels = assign_all(cb, X)
    assert all(labels[i] == assign(cb, X[i]) for i in range(50))


def test_assign_dimension_mismatch(rng):
    cb = Codebook(centers=rng.standard_normal((3, 4)))
    with pytest.raises(ValueError):
        assign(cb, rng.standard_normal(5))


def test_sse_nonincreasing(rng):
    X = rng.standard_normal((300, 6))
    init = X[rng.choice(300, size=8, replace=False)].copy()
    _, history = lloyd_iterations(X, init, max_iter=30, tol=0.0)
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


def test_deterministic_fit(rng):
    X = rng.standard_normal((500, 5))
    a = fit_kmeans(DescriptorMatrix(X), 10, seed=42)
    b = fit_kmeans(DescriptorMatrix(X), 10, seed=42)
    np.testing.assert_array_equal(a.centers, b.centers)
    c = fit_kmeans(DescriptorMatrix(X), 10, seed=43)
    assert not np.array_equal(a.centers, c.centers)


def test_rows_fewer_than_k(rng):
    with pytest.raises(ValueError):
        fit_kmeans(DescriptorMatrix(rng.standard_normal((3, 2))), 4, seed=0)


def test_duplicate_points_keep_k_centers():
    # more centers than distinct points forces the empty-cluster path
    X = np.repeat(np.array([[0.0, 0.0], [10.0, 10.0], [20.0, 0.0]]), 5, axis=0)
    noise = np.linspace(0, 0.01, 15)[:, None]
    cb = fit_kmeans(_dm(X + noise), 5, seed=1)
    assert cb.k == 5
    assert np.all(np.isfinite(cb.centers))


def test_save_load_roundtrip(tmp_path, rng):
    cb = fit_kmeans(DescriptorMatrix(rng.standard_normal((100, 4))), 6, seed=0)
    p = tmp_path / "cb.bin"
    save_codebook(p, cb)
    back = load_codebook(p)
    np.testing.assert_allclose(back.centers, cb.centers, rtol=1e-6, atol=1e-6)
    save_codebook(tmp_path / "cb2.bin", back)
    np.testing.assert_array_equal(load_codebook(tmp_path / "cb2.bin").centers, back.centers)
