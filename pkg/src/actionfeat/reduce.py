"""PCA fitting and projection applied to descriptors before VLAD/FV encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import (
    DegenerateInputError,
    DescriptorMatrix,
    read_block_file,
    write_block_file,
)


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Column mean plus an orthonormal projection basis.

    ``basis`` is (d, p) with columns ordered by descending explained variance;
    ``whiten_scale`` (optional) divides projected coordinates per component.
    """

    mean: np.ndarray
    basis: np.ndarray
    explained_variance: np.ndarray
    whiten_scale: np.ndarray | None = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        basis = np.asarray(self.basis, dtype=np.float64)
        ev = np.asarray(self.explained_variance, dtype=np.float64).reshape(-1)
        if basis.ndim != 2 or basis.shape[0] != mean.shape[0]:
            raise ValueError("basis must be (input_dim, output_dim)")
        if basis.shape[1] < 1:
            raise ValueError("output_dim must be >= 1")
        gram = basis.T @ basis
        if not np.allclose(gram, np.eye(basis.shape[1]), atol=1e-6):
            raise ValueError("basis columns must be orthonormal within 1e-6")
        scale = self.whiten_scale
        if scale is not None:
            scale = np.asarray(scale, dtype=np.float64).reshape(-1)
            if scale.shape != ev.shape:
                raise ValueError("whiten_scale must have one entry per component")
            scale.setflags(write=False)
        for arr in (mean, basis, ev):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "explained_variance", ev)
        object.__setattr__(self, "whiten_scale", scale)

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[1]


def fit_pca(
    samples: DescriptorMatrix, target_dim: int, seed: int = 0, whiten: bool = False
) -> PcaModel:
    """Fit a PCA model on ``samples`` via exact eigendecomposition.

    The decomposition is computed with an SVD of the centered sample matrix,
    which yields the covariance eigenvectors exactly (no iterative
    approximation).  Deterministic given the samples; ``seed`` is reserved for
    optional subsampling done by callers.  Eigenvector signs are fixed by
    making each column's largest-magnitude component positive.
    """
    del seed  # sampling happens in the caller; the fit itself is deterministic
    n, d = samples.rows, samples.dim
    if n < 2:
        raise ValueError(f"PCA needs at least 2 samples, got {n}")
    p = int(target_dim)
    if not 1 <= p <= min(n - 1, d):
        raise ValueError(
            f"target_dim must be in [1, min(rows - 1, dim)] = [1, {min(n - 1, d)}], got {p}"
        )
    X = samples.values.astype(np.float64)
    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variances = (s**2) / (n - 1)
    total = float(variances.sum())
    scale = max(1.0, float(np.abs(X).max()) ** 2) if X.size else 1.0
    if total <= 1e-18 * scale:
        raise DegenerateInputError("zero-variance input: PCA directions undefined")
    basis = vt[:p].T.copy()
    for col in range(p):
        j = int(np.argmax(np.abs(basis[:, col])))
        if basis[j, col] < 0:
            basis[:, col] = -basis[:, col]
    explained = variances[:p].copy()
    whiten_scale = np.sqrt(np.maximum(explained, 1e-12)) if whiten else None
    return PcaModel(mean=mean, basis=basis, explained_variance=explained, whiten_scale=whiten_scale)


def apply_pca(model: PcaModel, m: DescriptorMatrix) -> DescriptorMatrix:
    """Project each row to basis^T (row - mean); output dim is model.output_dim."""
    if m.dim != model.input_dim:
        raise ValueError(
            f"dimension mismatch: matrix has d={m.dim}, model expects {model.input_dim}"
        )
    projected = (m.values.astype(np.float64) - model.mean) @ model.basis
    if model.whiten_scale is not None:
        projected = projected / model.whiten_scale
    return DescriptorMatrix(projected)


def save_pca(path, model: PcaModel) -> None:
    blocks = [
        ("mean", model.mean.reshape(1, -1)),
        ("basis", model.basis),
        ("explained_variance", model.explained_variance.reshape(1, -1)),
    ]
    meta = {
        "kind": "pca",
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "whiten": model.whiten_scale is not None,
    }
    if model.whiten_scale is not None:
        blocks.append(("whiten_scale", model.whiten_scale.reshape(1, -1)))
    write_block_file(path, meta, blocks)


def load_pca(path) -> PcaModel:
    meta, arrays = read_block_file(path)
    if meta.get("kind") != "pca":
        raise ValueError(f"{path}: not a PCA model file")
    return PcaModel(
        mean=arrays["mean"].reshape(-1),
        basis=arrays["basis"],
        explained_variance=arrays["explained_variance"].reshape(-1),
        whiten_scale=arrays["whiten_scale"].reshape(-1) if meta.get("whiten") else None,
    )
