"""videofeat: export VGG-16 activations from real clips into descriptor files.

Bridges raw videos or frame directories into the descriptor-file + manifest
layout consumed by the actionfeat encoding pipeline.
"""

from .extract import ExtractJob, extract, write_desc1
from .frames import (
    MEAN_RGB,
    SIDE,
    UndecodableInput,
    frames_from_dir,
    frames_from_video,
    load_frames,
    load_image,
    preprocess,
)
from .net import (
    FC_DIM,
    LAYERS,
    POOL5_CHANNELS,
    POOL5_SIDE,
    SCORE_DIM,
    flatten_pool5,
    forward_activations,
    load_network,
)

__version__ = "0.1.0"

__all__ = [
    "ExtractJob",
    "FC_DIM",
    "LAYERS",
    "MEAN_RGB",
    "POOL5_CHANNELS",
    "POOL5_SIDE",
    "SCORE_DIM",
    "SIDE",
    "UndecodableInput",
    "extract",
    "flatten_pool5",
    "forward_activations",
    "frames_from_dir",
    "frames_from_video",
    "load_frames",
    "load_image",
    "load_network",
    "preprocess",
    "write_desc1",
]
