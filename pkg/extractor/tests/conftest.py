import numpy as np
import pytest
import torch
import torchvision
from PIL import Image

from videofeat.net import load_network


@pytest.fixture(scope="session")
def weights_path(tmp_path_factory):
    # randomly initialized net saved to disk: tests exercise shapes, formats
    # and determinism, none of which depend on trained parameters
    path = tmp_path_factory.mktemp("weights") / "vgg16_test.pt"
    torch.manual_seed(0)
    net = torchvision.models.vgg16(weights=None)
    torch.save(net.state_dict(), path)
    return path


@pytest.fixture(scope="session")
def net(weights_path):
    return load_network(weights_path)


def write_clip(root, n_frames, seed=0, side=32):
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    for i in range(n_frames):
        arr = rng.integers(0, 256, size=(side, side, 3), dtype=np.uint8)
        Image.fromarray(arr, "RGB").save(root / f"frame_{i:04d}.png")
    return root


@pytest.fixture()
def make_clip():
    return write_clip


@pytest.fixture(scope="session")
def clip3(tmp_path_factory):
    return write_clip(tmp_path_factory.mktemp("clips") / "clip3", 3, seed=1)


@pytest.fixture(scope="session")
def clip30(tmp_path_factory):
    return write_clip(tmp_path_factory.mktemp("clips") / "clip30", 30, seed=2)
