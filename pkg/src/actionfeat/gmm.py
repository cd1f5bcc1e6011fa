"""Diagonal-covariance Gaussian mixture fitting (EM) and posterior computation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import assign_all, fit_kmeans
from .datamodel import DescriptorMatrix, read_block_file, write_block_file

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class GmmModel:
    """Mixture priors, means and per-dimension variances, all (K,)/(K, d)."""

    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64).reshape(-1)
        means = np.asarray(self.means, dtype=np.float64)
        variances = np.asarray(self.variances, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] != priors.shape[0]:
            raise ValueError("means must be (K, d) matching priors")
        if variances.shape != means.shape:
            raise ValueError("variances must have the same shape as means")
        if np.any(priors < 0):
            raise ValueError("priors must be nonnegative")
        if abs(float(priors.sum()) - 1.0) > 1e-9:
            raise ValueError(f"priors must sum to 1 within 1e-9, got {priors.sum()!r}")
        if np.any(variances <= 0) or not np.all(np.isfinite(variances)):
            raise ValueError("variances must be strictly positive and finite")
        for arr in (priors, means, variances):
            arr.setflags(write=False)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def k(self) -> int:
        return self.priors.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def variance_floor(X: np.ndarray) -> float:
    """Per-dimension variance floor: max(1e-6, 1e-4 * mean sample variance)."""
    return max(1e-6, 1e-4 * float(np.var(X, axis=0).mean()))


def _log_joint(priors, means, variances, X) -> np.ndarray:
    """(n, K) array of log pi_k + log N(x_i; mu_k, diag sigma2_k)."""
    inv = 1.0 / variances
    # quadratic form per (i, k) via GEMM: sum_j (x_j - mu_jk)^2 / sigma2_jk
    quad = (X**2) @ inv.T - 2.0 * (X @ (means * inv).T) + (means**2 * inv).sum(axis=1)
    logdet = np.log(variances).sum(axis=1)
    with np.errstate(divide="ignore"):
        logp = np.log(priors)
    return logp + 0.5 * (-X.shape[1] * _LOG_2PI - logdet - np.maximum(quad, 0.0))


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True))).reshape(-1)


def posteriors(model: GmmModel, m: DescriptorMatrix) -> np.ndarray:
    """Soft assignments q_ik = pi_k N(x_i)/sum_t pi_t N(x_i), log-space stable.

    Each row sums to 1 within 1e-9.
    """
    if m.dim != model.dim:
        raise ValueError(f"dimension mismatch: matrix d={m.dim}, model d={model.dim}")
    X = m.values.astype(np.float64)
    log_joint = _log_joint(model.priors, model.means, model.variances, X)
    return np.exp(log_joint - _logsumexp_rows(log_joint)[:, None])


def avg_log_likelihood(model: GmmModel, m: DescriptorMatrix) -> float:
    """Mean over rows of log sum_k pi_k N(x_i; mu_k, sigma2_k)."""
    X = m.values.astype(np.float64)
    return float(_logsumexp_rows(_log_joint(model.priors, model.means, model.variances, X)).mean())


def em_fit(
    samples: DescriptorMatrix,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-7,
) -> tuple[GmmModel, list[float]]:
    """EM for a diagonal GMM; returns the model and per-iteration average LL.

    Initialization comes from k-means on the same samples and seed: priors
    proportional to cluster sizes, means at the centers, variances from the
    within-cluster spread (floored).  Iterates until the average
    log-likelihood improves by less than ``tol`` or ``max_iter`` is reached.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if samples.rows < k:
        raise ValueError(f"need at least k={k} samples, got {samples.rows}")
    X = samples.values.astype(np.float64)
    n, d = X.shape
    floor = variance_floor(X)
    global_var = np.maximum(np.var(X, axis=0), floor)

    cb = fit_kmeans(samples, k, seed=seed, max_iter=max_iter)
    labels = assign_all(cb, X)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    means = np.array(cb.centers)
    variances = np.empty_like(means)
    for j in range(k):
        mask = labels == j
        if mask.any():
            variances[j] = np.maximum(np.var(X[mask], axis=0), floor)
        else:
            counts[j] = 1.0  # keep the mode alive with a vague component
            variances[j] = global_var
    priors = counts / counts.sum()

    history: list[float] = []
    for _ in range(max_iter):
        log_joint = _log_joint(priors, means, variances, X)
        log_norm = _logsumexp_rows(log_joint)
        history.append(float(log_norm.mean()))
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
        q = np.exp(log_joint - log_norm[:, None])

        nk = np.maximum(q.sum(axis=0), 1e-12)
        priors = q.sum(axis=0) / n
        priors = priors / priors.sum()
        means = (q.T @ X) / nk[:, None]
        variances = np.maximum((q.T @ (X**2)) / nk[:, None] - means**2, floor)

    return GmmModel(priors=priors, means=means, variances=variances), history


def fit_gmm(
    samples: DescriptorMatrix,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-7,
) -> GmmModel:
    """Fit a diagonal GMM; see :func:`em_fit`."""
    model, _ = em_fit(samples, k, seed=seed, max_iter=max_iter, tol=tol)
    return model


def save_gmm(path, model: GmmModel) -> None:
    write_block_file(
        path,
        {"kind": "gmm", "k": model.k, "dim": model.dim},
        [
            ("priors", model.priors.reshape(1, -1)),
            ("means", model.means),
            ("variances", model.variances),
        ],
    )


def load_gmm(path) -> GmmModel:
    meta, arrays = read_block_file(path)
    if meta.get("kind") != "gmm":
        raise ValueError(f"{path}: not a GMM model file")
    priors = arrays["priors"].reshape(-1)
    # float32 storage perturbs the sum; restore the sum-to-1 invariant
    priors = priors / priors.sum()
    return GmmModel(priors=priors, means=arrays["means"], variances=arrays["variances"])
