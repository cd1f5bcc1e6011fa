"""Batch activation export: real clips in, DESC1 descriptor files + manifest out.

The on-disk layout is the one the downstream encoding pipeline documents as
its external interface: per video and layer a DESC1 file (magic b"DESC1",
u64 LE row count, u64 LE dimension, float32 LE row-major payload), plus a
manifest.json listing classes, videos with per-layer sources, and splits.
Only those formats couple the two packages.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import frames as fr
from . import net as vggnet

log = logging.getLogger("videofeat")

DESC1_MAGIC = b"DESC1"

REPORT_NAME = "extract_report.json"
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ExtractJob:
    """One export run: which inputs, which layers, sampling stride, where to."""

    inputs: tuple
    out: Path
    layers: tuple = vggnet.LAYERS
    stride: int = 1
    batch_size: int = 16

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "out", Path(self.out))
        layers = tuple(self.layers)
        bad = [l for l in layers if l not in vggnet.LAYERS]
        if bad:
            raise ValueError(f"unknown layers {bad}; choose from {list(vggnet.LAYERS)}")
        if not layers:
            raise ValueError("at least one layer must be selected")
        object.__setattr__(self, "layers", layers)
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if not self.inputs:
            raise ValueError("no inputs given")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def write_desc1(path, arr) -> None:
    """Write a 2-D array as a DESC1 file (float32 LE payload)."""
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"descriptor payload must be 2-D, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(DESC1_MAGIC)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def _video_id(path: Path, used: set) -> str:
    stem = path.name if path.is_dir() else path.stem
    base = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in stem) or "video"
    vid, k = base, 1
    while vid in used:
        k += 1
        vid = f"{base}_{k}"
    return vid


def _run_batches(net, tensors: list, batch_size: int, layers) -> dict[str, np.ndarray]:
    """Forward all frames in fixed-size batches; rows stacked per layer."""
    chunks: dict[str, list] = {layer: [] for layer in layers}
    for start in range(0, len(tensors), batch_size):
        batch = torch.from_numpy(np.stack(tensors[start : start + batch_size]))
        acts = vggnet.forward_activations(net, batch)
        for layer in layers:
            t = acts[layer]
            chunks[layer].append(vggnet.flatten_pool5(t) if layer == "pool5" else t.numpy())
    return {layer: np.concatenate(parts, axis=0) for layer, parts in chunks.items()}


def extract(job: ExtractJob, net) -> Path:
    """Run the network over every input; write DESC1 files, manifest, report.

    Returns the manifest path.  Undecodable inputs are skipped with a warning
    and recorded in the report file; decodable ones get one DESC1 file per
    selected layer, written once each.
    """
    job.out.mkdir(parents=True, exist_ok=True)
    processed, skipped = [], []
    used: set = set()
    for inp in job.inputs:
        try:
            tensors = fr.load_frames(inp, job.stride)
        except fr.UndecodableInput as exc:
            log.warning("skipping %s: %s", inp, exc)
            skipped.append({"input": str(inp), "reason": str(exc)})
            continue
        vid = _video_id(inp, used)
        used.add(vid)
        acts = _run_batches(net, tensors, job.batch_size, job.layers)
        sources = {}
        for layer in job.layers:
            rel = f"{vid}_{layer}.desc"
            write_desc1(job.out / rel, acts[layer])
            sources[layer] = rel
        processed.append(
            {"id": vid, "input": str(inp), "frame_count": len(tensors), "sources": sources}
        )
        log.info("extracted %s: %d frames, layers %s", vid, len(tensors), ",".join(job.layers))

    manifest = _write_manifest(job, processed)
    _write_report(job, processed, skipped)
    return manifest


def _write_manifest(job: ExtractJob, processed: list) -> Path:
    """Manifest in the downstream pipeline's schema.

    Class labels are unknowable at extraction time, so every video gets the
    single placeholder class and lands in the train list of one split; edit
    classes/labels/splits before supervised runs.
    """
    path = job.out / MANIFEST_NAME
    videos = []
    for rec in processed:
        entry = {
            "id": rec["id"],
            "label": 0,
            "frame_count": rec["frame_count"],
            "sources": rec["sources"],
        }
        if "pool5" in job.layers:
            entry["pool5_side"] = vggnet.POOL5_SIDE
        videos.append(entry)
    doc = {
        "classes": ["unlabeled"],
        "videos": videos,
        "splits": {"split1": {"train": [v["id"] for v in videos], "test": []}},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _write_report(job: ExtractJob, processed: list, skipped: list) -> Path:
    path = job.out / REPORT_NAME
    doc = {
        "layers": list(job.layers),
        "stride": job.stride,
        "processed": processed,
        "skipped": skipped,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path
