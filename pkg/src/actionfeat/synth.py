"""Synthetic descriptor datasets for end-to-end runs without video or a CNN.

Each class owns a private mixture of Gaussians; videos sample their frame
descriptors from the class mixture.  ``separation`` scales the spread of the
mode means: 0 makes all classes identical, large values make them nearly
disjoint.  Generation is single-threaded and byte-identical for equal specs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datamodel import Dataset, DescriptorMatrix, VideoRecord, save_manifest, write_descriptor_file


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 5
    videos_per_class: int = 20
    frames_per_video: int = 30
    descriptor_dim: int = 16
    modes_per_class: int = 2
    separation: float = 10.0
    seed: int = 0
    # optional extra layers so every encoder path can be exercised
    pool5_side: int = 0       # 0 = no pool5 tensors
    pool5_channels: int = 32
    score_dim: int = 0        # 0 = no softmax score rows

    def __post_init__(self):
        if min(self.classes, self.videos_per_class, self.frames_per_video,
               self.descriptor_dim, self.modes_per_class) < 1:
            raise ValueError("all counts must be >= 1")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, renormalized so each row sums to 1 within 1e-9."""
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=1, keepdims=True)


def generate(spec: SynthSpec, out_dir) -> Dataset:
    """Write descriptor files plus a manifest under ``out_dir``; return the Dataset.

    The single split is stratified 70/30 per class.  Videos' descriptors go to
    layer "features"; optional pool5 tensors and softmax score rows go to
    layers "pool5" and "softmax".
    """
    out_dir = Path(out_dir)
    data_dir = out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    d = spec.descriptor_dim
    g = spec.modes_per_class
    # mode means at pairwise distances scaled by separation
    mode_means = spec.separation * rng.standard_normal((spec.classes, g, d)) / np.sqrt(d)
    if spec.pool5_side > 0:
        m = spec.pool5_channels
        pool5_means = spec.separation * rng.standard_normal((spec.classes, g, m)) / np.sqrt(m)

    videos: list[VideoRecord] = []
    train_ids: list[str] = []
    test_ids: list[str] = []
    for label in range(spec.classes):
        n_train = int(round(0.7 * spec.videos_per_class))
        for v in range(spec.videos_per_class):
            vid = f"c{label:02d}_v{v:03d}"
            f = spec.frames_per_video
            sources: dict[str, Path] = {}

            modes = rng.integers(g, size=f)
            desc = mode_means[label, modes] + rng.standard_normal((f, d))
            feat_path = data_dir / f"{vid}_features.desc"
            write_descriptor_file(feat_path, DescriptorMatrix(desc))
            sources["features"] = feat_path

            if spec.pool5_side > 0:
                a2 = spec.pool5_side**2
                p_modes = rng.integers(g, size=f * a2)
                rows = pool5_means[label, p_modes] + rng.standard_normal((f * a2, spec.pool5_channels))
                pool_path = data_dir / f"{vid}_pool5.desc"
                write_descriptor_file(pool_path, DescriptorMatrix(rows))
                sources["pool5"] = pool_path

            if spec.score_dim > 0:
                logits = rng.standard_normal((f, spec.score_dim))
                logits[:, label % spec.score_dim] += 0.5 * spec.separation
                scores = softmax_rows(logits)
                assert abs(float(scores.sum(axis=1).max()) - 1.0) < 1e-9
                score_path = data_dir / f"{vid}_softmax.desc"
                write_descriptor_file(score_path, DescriptorMatrix(scores))
                sources["softmax"] = score_path

            videos.append(
                VideoRecord(
                    id=vid,
                    label=label,
                    frame_count=f,
                    sources=sources,
                    pool5_side=spec.pool5_side if spec.pool5_side > 0 else None,
                )
            )
            (train_ids if v < n_train else test_ids).append(vid)

    dataset = Dataset(
        classes=tuple(f"class{c:02d}" for c in range(spec.classes)),
        videos=tuple(videos),
        splits={"split1": (tuple(train_ids), tuple(test_ids))},
    )
    save_manifest(out_dir / "manifest.json", dataset)
    return dataset
