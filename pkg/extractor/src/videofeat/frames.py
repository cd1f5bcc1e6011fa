"""Frame loading and preprocessing.

An input is either a directory of image frames (read with Pillow, sorted by
file name) or a video file (decoded by an ffmpeg subprocess).  Every frame
comes back as a float32 (3, 224, 224) array in 0..255 RGB with the dataset
mean subtracted.
"""

from __future__ import annotations

import subprocess
from pathlib import Path

import numpy as np
from PIL import Image

SIDE = 224
MEAN_RGB = np.array([123.68, 116.779, 103.939], dtype=np.float32)

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp"}


class UndecodableInput(RuntimeError):
    """The input exists but no usable frames could be decoded from it."""


def preprocess(rgb) -> np.ndarray:
    """(224, 224, 3) RGB in 0..255 -> mean-subtracted float32 (3, 224, 224)."""
    arr = np.asarray(rgb, dtype=np.float32)
    if arr.shape != (SIDE, SIDE, 3):
        raise ValueError(f"expected ({SIDE}, {SIDE}, 3) RGB frame, got {arr.shape}")
    arr = arr - MEAN_RGB
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        im = im.convert("RGB")
        if im.size != (SIDE, SIDE):
            im = im.resize((SIDE, SIDE), Image.BILINEAR)
        return preprocess(np.asarray(im))


def frames_from_dir(path: Path, stride: int) -> list[np.ndarray]:
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    picked = files[::stride]
    if not picked:
        raise UndecodableInput(f"{path}: no image frames found")
    out = []
    for p in picked:
        try:
            out.append(load_image(p))
        except (OSError, ValueError) as exc:
            # one bad frame poisons the clip; partial clips are worse than none
            raise UndecodableInput(f"{p}: {exc}") from exc
    return out


def frames_from_video(path: Path, stride: int) -> list[np.ndarray]:
    """Decode a video via ffmpeg, scaled to 224x224, sampling every stride-th frame.

    The raw stream is buffered in memory; fine at clip scale.
    """
    cmd = [
        "ffmpeg", "-nostdin", "-v", "error",
        "-i", str(path),
        "-vf", f"scale={SIDE}:{SIDE}",
        "-f", "rawvideo", "-pix_fmt", "rgb24", "-",
    ]
    try:
        proc = subprocess.run(cmd, capture_output=True, check=True)
    except FileNotFoundError as exc:
        raise UndecodableInput(f"{path}: ffmpeg not available ({exc})") from exc
    except subprocess.CalledProcessError as exc:
        detail = exc.stderr.decode(errors="replace").strip().splitlines()
        raise UndecodableInput(
            f"{path}: ffmpeg failed: {detail[-1] if detail else 'no diagnostic'}"
        ) from exc
    frame_bytes = SIDE * SIDE * 3
    n = len(proc.stdout) // frame_bytes
    if n == 0:
        raise UndecodableInput(f"{path}: no frames decoded")
    out = []
    for i in range(0, n, stride):
        chunk = np.frombuffer(proc.stdout, dtype=np.uint8, count=frame_bytes, offset=i * frame_bytes)
        out.append(preprocess(chunk.reshape(SIDE, SIDE, 3)))
    return out


def load_frames(path, stride: int) -> list[np.ndarray]:
    """Dispatch on input kind: directory of frames vs video file."""
    path = Path(path)
    if path.is_dir():
        return frames_from_dir(path, stride)
    if path.is_file():
        return frames_from_video(path, stride)
    raise UndecodableInput(f"{path}: no such file or directory")
