"""K-means codebook for VLAD encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import DescriptorMatrix, read_block_file, write_block_file


@dataclass(frozen=True, eq=False)
class Codebook:
    """Fitted k-means centers, (k, d)."""

    centers: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[0] < 1:
            raise ValueError("centers must be a (k, d) array with k >= 1")
        if not np.all(np.isfinite(centers)):
            raise ValueError("centers must be finite")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances, GEMM-based, clipped at zero."""
    x2 = np.einsum("ij,ij->i", X, X)
    c2 = np.einsum("ij,ij->i", centers, centers)
    d2 = x2[:, None] - 2.0 * (X @ centers.T) + c2[None, :]
    return np.maximum(d2, 0.0)


def assign_all(cb: Codebook, X: np.ndarray) -> np.ndarray:
    """Nearest-center index per row; ties broken by lowest index."""
    X = np.asarray(X, dtype=np.float64)
    return np.argmin(squared_distances(X, cb.centers), axis=1)


def assign(cb: Codebook, x) -> int:
    """Index of the center nearest to ``x``; ties broken by lowest index."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != cb.dim:
        raise ValueError(f"dimension mismatch: x has d={x.shape[0]}, codebook d={cb.dim}")
    d2 = ((cb.centers - x) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding (D^2 sampling)."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(closest.sum())
        if total <= 0.0:
            # all remaining points coincide with chosen centers
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[j] = X[idx]
        closest = np.minimum(closest, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def lloyd_iterations(
    X: np.ndarray,
    centers: np.ndarray,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, list[float]]:
    """Run Lloyd iterations; returns final centers and the per-iteration SSE.

    An empty cluster is re-seeded at the point currently farthest from its
    assigned center, which keeps k constant and cannot increase the SSE.
    """
    k = centers.shape[0]
    centers = centers.copy()
    prev_labels = None
    history: list[float] = []

    for _ in range(max_iter):
        d2 = squared_distances(X, centers)
        labels = np.argmin(d2, axis=1)
        dist_to_assigned = d2[np.arange(X.shape[0]), labels]
        history.append(float(dist_to_assigned.sum()))
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels

        new_centers = centers.copy()
        empties = []
        for j in range(k):
            mask = labels == j
            if mask.any():
                new_centers[j] = X[mask].mean(axis=0)
            else:
                empties.append(j)
        if empties:
            d = dist_to_assigned.copy()
            for j in empties:
                far = int(np.argmax(d))
                new_centers[j] = X[far]
                d[far] = 0.0

        movement = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if movement < tol:
            break
    return centers, history


def fit_kmeans(
    samples: DescriptorMatrix,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> Codebook:
    """Fit a k-center codebook with k-means++ seeding and Lloyd iterations.

    Deterministic given (samples, k, seed, max_iter, tol).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if samples.rows < k:
        raise ValueError(f"need at least k={k} samples, got {samples.rows}")
    X = samples.values.astype(np.float64)
    rng = np.random.default_rng([int(seed), 0x6B6D])
    centers = _kmeanspp_init(X, k, rng)
    centers, _ = lloyd_iterations(X, centers, max_iter, tol)
    return Codebook(centers=centers)


def save_codebook(path, cb: Codebook) -> None:
    write_block_file(path, {"kind": "kmeans", "k": cb.k, "dim": cb.dim}, [("centers", cb.centers)])


def load_codebook(path) -> Codebook:
    meta, arrays = read_block_file(path)
    if meta.get("kind") != "kmeans":
        raise ValueError(f"{path}: not a codebook file")
    return Codebook(centers=arrays["centers"])
