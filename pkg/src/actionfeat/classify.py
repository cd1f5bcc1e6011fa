"""One-vs-all linear SVM: dual coordinate descent training, prediction, evaluation.

The binary solver minimizes the L2-regularized L1-hinge objective

    0.5 ||w||^2 + C sum_i max(0, 1 - y_i w.x_i)

through its dual (box-constrained QP, 0 <= alpha_i <= C) with coordinate
descent over a per-epoch random permutation.  The bias is handled by an
augmented constant feature of value 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import Encoding, read_block_file, write_block_file


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Per-class weight vectors and biases for one-vs-all linear scoring."""

    weights: np.ndarray
    biases: np.ndarray
    c_param: float

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        biases = np.asarray(self.biases, dtype=np.float64).reshape(-1)
        if weights.ndim != 2 or weights.shape[0] != biases.shape[0]:
            raise ValueError("weights must be (C, D) with one bias per class")
        if weights.shape[0] < 2:
            raise ValueError("one-vs-all needs at least 2 classes")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise ValueError("weights and biases must be finite")
        weights.setflags(write=False)
        biases.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    accuracy: float
    confusion: np.ndarray  # (C, C), true class by predicted class
    per_class: np.ndarray  # (C,) per-class accuracy (0 where no test examples)


def dual_cd(
    X: np.ndarray,
    y: np.ndarray,
    c_param: float,
    rng: np.random.Generator,
    max_epochs: int = 1000,
    tol: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray]:
    """Dual coordinate descent for one binary L1-hinge SVM.

    ``X`` is (n, D) with any bias feature already appended; ``y`` is +-1.
    Returns (w, alpha).  Stops when the spread of projected gradients over an
    epoch drops below ``tol`` or after ``max_epochs``.
    """
    n = X.shape[0]
    q_diag = np.einsum("ij,ij->i", X, X)
    alpha = np.zeros(n)
    w = np.zeros(X.shape[1])
    for _ in range(max_epochs):
        pg_max, pg_min = -np.inf, np.inf
        for i in rng.permutation(n):
            g = y[i] * float(w @ X[i]) - 1.0
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= c_param:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0:
                new = min(max(alpha[i] - g / q_diag[i], 0.0), c_param)
                if new != alpha[i]:
                    w = w + (new - alpha[i]) * y[i] * X[i]
                    alpha[i] = new
        if pg_max - pg_min < tol:
            break
    return w, alpha


def dual_objective(X: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Dual objective sum(alpha) - 0.5 ||sum_i alpha_i y_i x_i||^2 (maximized)."""
    w = (alpha * y) @ X
    return float(alpha.sum() - 0.5 * w @ w)


def _stack(features: list[Encoding]) -> np.ndarray:
    if not features:
        raise ValueError("no feature encodings given")
    dim = features[0].dim
    for f in features:
        if f.dim != dim:
            raise ValueError(f"mixed feature dims: {f.dim} vs {dim}")
    return np.stack([f.values for f in features])


def train_one_vs_all(
    features: list[Encoding],
    labels: list[int],
    c_param: float = 100.0,
    seed: int = 0,
    max_epochs: int = 1000,
    tol: float = 1e-4,
) -> SvmModel:
    """Train C binary classifiers, one per class against the rest.

    Deterministic given (features, labels, c_param, seed): class c uses the
    RNG substream seeded by (seed, c).
    """
    if c_param <= 0:
        raise ValueError("c_param must be > 0")
    X = _stack(features)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape[0] != X.shape[0]:
        raise ValueError("labels must match features one-to-one")
    n_classes = int(y.max()) + 1 if y.size else 0
    if n_classes < 2:
        raise ValueError("one-vs-all needs at least 2 classes")
    counts = np.bincount(y, minlength=n_classes)
    for c in range(n_classes):
        if counts[c] == 0:
            raise ValueError(f"class {c} has no training examples")
        if counts[c] == y.shape[0]:
            raise ValueError(f"class {c} has no negative examples")

    X_aug = np.hstack([X, np.ones((X.shape[0], 1))])
    weights = np.empty((n_classes, X.shape[1]))
    biases = np.empty(n_classes)
    for c in range(n_classes):
        y_bin = np.where(y == c, 1.0, -1.0)
        rng = np.random.default_rng([int(seed), c])
        w, _ = dual_cd(X_aug, y_bin, c_param, rng, max_epochs=max_epochs, tol=tol)
        weights[c] = w[:-1]
        biases[c] = w[-1]
    return SvmModel(weights=weights, biases=biases, c_param=float(c_param))


def decision_scores(model: SvmModel, x: Encoding) -> np.ndarray:
    """Per-class scores weights_c . x + bias_c."""
    if x.dim != model.dim:
        raise ValueError(f"dimension mismatch: encoding d={x.dim}, model d={model.dim}")
    return model.weights @ x.values + model.biases


def predict(model: SvmModel, x: Encoding) -> int:
    """Class with the highest score; ties broken by lowest class index."""
    return int(np.argmax(decision_scores(model, x)))


def evaluate(model: SvmModel, features: list[Encoding], labels: list[int]) -> EvaluationReport:
    """Accuracy and C x C confusion matrix over a test set."""
    if not features:
        raise ValueError("cannot evaluate on an empty test set")
    y = np.asarray(labels, dtype=np.int64)
    if y.shape[0] != len(features):
        raise ValueError("labels must match features one-to-one")
    confusion = np.zeros((model.classes, model.classes), dtype=np.int64)
    for enc, true in zip(features, y):
        confusion[true, predict(model, enc)] += 1
    correct = int(np.trace(confusion))
    row_sums = confusion.sum(axis=1)
    per_class = np.divide(
        np.diag(confusion),
        row_sums,
        out=np.zeros(model.classes, dtype=np.float64),
        where=row_sums > 0,
    )
    return EvaluationReport(
        accuracy=correct / len(features),
        confusion=confusion,
        per_class=per_class,
    )


def save_svm(path, model: SvmModel) -> None:
    write_block_file(
        path,
        {"kind": "svm", "classes": model.classes, "dim": model.dim, "c_param": model.c_param},
        [("weights", model.weights), ("biases", model.biases.reshape(1, -1))],
    )


def load_svm(path) -> SvmModel:
    meta, arrays = read_block_file(path)
    if meta.get("kind") != "svm":
        raise ValueError(f"{path}: not an SVM model file")
    return SvmModel(
        weights=arrays["weights"],
        biases=arrays["biases"].reshape(-1),
        c_param=float(meta["c_param"]),
    )
