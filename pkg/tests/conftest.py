import numpy as np
import pytest

from actionfeat import synth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory):
    """Small well-separated dataset shared by pipeline-level tests."""
    root = tmp_path_factory.mktemp("synthdata")
    spec = synth.SynthSpec(
        classes=3,
        videos_per_class=10,
        frames_per_video=20,
        descriptor_dim=12,
        modes_per_class=2,
        separation=10.0,
        seed=11,
        pool5_side=2,
        pool5_channels=8,
        score_dim=6,
    )
    ds = synth.generate(spec, root)
    return root, ds
