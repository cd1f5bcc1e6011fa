"""Per-video feature encoders: score averaging, average pooling, latent concept
descriptors, VLAD, Fisher vectors, their normalizations, and fusion.

VLAD accumulates per-center residual sums v^i = sum_{x: q(x)=i} (x - mu_i),
intra-normalizes each sub-vector, concatenates to K*d dims, then applies the
two-stage normalization (power-law, L2).

Fisher vectors aggregate first- and second-order statistics under a diagonal
GMM with soft assignments q_ik:

    u_jk = 1/(N sqrt(pi_k))   * sum_i q_ik (x_ji - mu_jk) / sigma_jk
    v_jk = 1/(N sqrt(2 pi_k)) * sum_i q_ik [((x_ji - mu_jk)/sigma_jk)^2 - 1]

and concatenate all u then all v (mode-major, dimension-minor) to 2*K*d dims,
followed by the same two-stage normalization.

Both encoders order descriptor rows canonically (lexicographic sort) before
accumulating, so the output is bitwise independent of input row order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .codebook import Codebook, squared_distances
from .datamodel import (
    ActivationTensor,
    DescriptorMatrix,
    EmptyVideoError,
    Encoding,
    read_descriptor_file,
    write_descriptor_file,
)
from .gmm import GmmModel, posteriors
from .reduce import PcaModel, apply_pca


@dataclass(frozen=True)
class EncoderConfig:
    """Knobs shared by the VLAD/FV paths: power-law exponent, K's, PCA dim."""

    alpha: float = 0.2
    vlad_k: int = 256
    fv_k: int = 256
    pca_dim: int = 256

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")


DEFAULT_CONFIG = EncoderConfig()


def power_law(v: np.ndarray, alpha: float) -> np.ndarray:
    """Component-wise |v_j|^alpha * sign(v_j); identity at alpha = 1."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    v = np.asarray(v, dtype=np.float64)
    if alpha == 1.0:
        return v.copy()
    return np.sign(v) * np.abs(v) ** alpha


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / ||v||_2; the zero vector maps to itself."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return v.copy()
    return v / norm


def _canonical_rows(values: np.ndarray) -> np.ndarray:
    # lexicographic row order: makes accumulation independent of input order
    X = np.asarray(values, dtype=np.float64)
    order = np.lexsort(X.T[::-1])
    return X[order]


def objects1k(frame_scores: DescriptorMatrix) -> Encoding:
    """Average per-frame object-score vectors across the video (no normalization)."""
    if frame_scores.rows < 1:
        raise EmptyVideoError("cannot average scores of an empty video")
    mean = frame_scores.values.astype(np.float64).mean(axis=0)
    return Encoding(kind="objects1k", values=mean, source=f"objects1k(d={frame_scores.dim})")


def average_pool(frames: DescriptorMatrix) -> Encoding:
    """Column mean over per-frame activation rows."""
    if frames.rows < 1:
        raise EmptyVideoError("cannot average-pool an empty video")
    mean = frames.values.astype(np.float64).mean(axis=0)
    return Encoding(kind="avgpool", values=mean, source=f"avgpool(d={frames.dim})")


def lcd_reshape(t: ActivationTensor) -> DescriptorMatrix:
    """Turn an (a, a, M) activation block into a^2 latent concept descriptors.

    Row r*a + c holds the M filter responses at spatial location (r, c); the
    multiset of values is preserved exactly.
    """
    a, m = t.side, t.channels
    return DescriptorMatrix(t.values.reshape(a * a, m))


def vlad_residuals(cb: Codebook, m: DescriptorMatrix) -> np.ndarray:
    """Raw (K, d) per-center residual sums, before any normalization."""
    if m.dim != cb.dim:
        raise ValueError(f"dimension mismatch: descriptors d={m.dim}, codebook d={cb.dim}")
    X = _canonical_rows(m.values)
    labels = np.argmin(squared_distances(X, cb.centers), axis=1)
    out = np.zeros((cb.k, cb.dim), dtype=np.float64)
    for j in range(cb.k):
        mask = labels == j
        if mask.any():
            out[j] = (X[mask] - cb.centers[j]).sum(axis=0)
    return out


def encode_vlad(cb: Codebook, m: DescriptorMatrix, cfg: EncoderConfig = DEFAULT_CONFIG) -> Encoding:
    """VLAD with intra-normalization and the two-stage normalization."""
    if m.rows < 1:
        raise EmptyVideoError("cannot VLAD-encode an empty video")
    sub = vlad_residuals(cb, m)
    norms = np.linalg.norm(sub, axis=1)
    nonzero = norms > 0.0
    sub[nonzero] = sub[nonzero] / norms[nonzero, None]
    flat = l2_normalize(power_law(sub.reshape(-1), cfg.alpha))
    return Encoding(
        kind="vlad",
        values=flat,
        source=f"vlad(k={cb.k},d={cb.dim},alpha={cfg.alpha})",
    )


def fisher_stats(g: GmmModel, m: DescriptorMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Raw (K, d) first- and second-order Fisher statistics, pre-normalization."""
    if m.dim != g.dim:
        raise ValueError(f"dimension mismatch: descriptors d={m.dim}, GMM d={g.dim}")
    X = _canonical_rows(m.values)
    n = X.shape[0]
    q = posteriors(g, DescriptorMatrix(X))
    sigma = np.sqrt(g.variances)
    u = np.empty((g.k, g.dim), dtype=np.float64)
    v = np.empty((g.k, g.dim), dtype=np.float64)
    for k in range(g.k):
        z = (X - g.means[k]) / sigma[k]
        u[k] = (q[:, k] @ z) / (n * np.sqrt(g.priors[k]))
        v[k] = (q[:, k] @ (z**2 - 1.0)) / (n * np.sqrt(2.0 * g.priors[k]))
    return u, v


def encode_fisher(g: GmmModel, m: DescriptorMatrix, cfg: EncoderConfig = DEFAULT_CONFIG) -> Encoding:
    """Fisher vector (all u, then all v) with the two-stage normalization."""
    if m.rows < 1:
        raise EmptyVideoError("cannot Fisher-encode an empty video")
    u, v = fisher_stats(g, m)
    flat = l2_normalize(power_law(np.concatenate([u.reshape(-1), v.reshape(-1)]), cfg.alpha))
    return Encoding(
        kind="fisher",
        values=flat,
        source=f"fisher(k={g.k},d={g.dim},alpha={cfg.alpha})",
    )


def encode_lcd(
    frames: list[ActivationTensor],
    pca: PcaModel,
    model: Codebook | GmmModel,
    cfg: EncoderConfig = DEFAULT_CONFIG,
) -> Encoding:
    """Latent-concept-descriptor path: reshape each frame's pool block into a^2
    descriptors, stack all frames, reduce with PCA, then VLAD- or FV-encode."""
    if not frames:
        raise EmptyVideoError("cannot LCD-encode a video with no frames")
    a, m_ch = frames[0].side, frames[0].channels
    for t in frames:
        if t.side != a or t.channels != m_ch:
            raise ValueError(
                f"mixed tensor shapes: expected ({a}, {a}, {m_ch}), got ({t.side}, {t.side}, {t.channels})"
            )
    if pca.input_dim != m_ch:
        raise ValueError(f"PCA expects input dim {pca.input_dim}, tensors have M={m_ch}")
    stacked = np.vstack([lcd_reshape(t).values for t in frames])
    reduced = apply_pca(pca, DescriptorMatrix(stacked))
    if isinstance(model, Codebook):
        enc = encode_vlad(model, reduced, cfg)
        return replace(enc, kind="lcd-vlad", source="lcd-" + enc.source)
    enc = encode_fisher(model, reduced, cfg)
    return replace(enc, kind="lcd-fisher", source="lcd-" + enc.source)


def fuse(parts: list[Encoding]) -> Encoding:
    """Concatenate encodings in order; source records the part kinds."""
    if not parts:
        raise ValueError("fuse needs at least one encoding")
    values = np.concatenate([p.values for p in parts])
    return Encoding(kind="fused", values=values, source="+".join(p.kind for p in parts))


# ---------------------------------------------------------------------------
# Encoding persistence: DESC1 (1 x D) plus a JSON sidecar with provenance


def save_encoding(path, enc: Encoding) -> None:
    path = Path(path)
    write_descriptor_file(path, DescriptorMatrix(enc.values.reshape(1, -1)))
    sidecar = {"kind": enc.kind, "dim": enc.dim, "source": enc.source}
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def load_encoding(path) -> Encoding:
    path = Path(path)
    m = read_descriptor_file(path)
    with open(path.with_suffix(path.suffix + ".json"), "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return Encoding(kind=sidecar["kind"], values=m.values.reshape(-1), source=sidecar.get("source", ""))
