"""VGG-16 activation taps.

The network is torchvision's VGG-16 built without downloading anything;
weights come from a local state-dict file.  Inputs follow the classic
recipe for this architecture: 224x224 RGB frames in 0..255 with the
per-channel dataset mean subtracted, no further scaling (see frames.py).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torchvision

LAYERS = ("pool5", "fc6", "fc7", "softmax")

POOL5_SIDE = 7
POOL5_CHANNELS = 512
FC_DIM = 4096
SCORE_DIM = 1000


def load_network(weights) -> torch.nn.Module:
    """Build VGG-16 and load ``weights`` (a torch state-dict file).

    Missing or unreadable weights are fatal: activations from an
    uninitialized network would be silently meaningless.
    """
    weights = Path(weights)
    if not weights.is_file():
        raise FileNotFoundError(
            f"missing network weights: {weights} (supply a local VGG-16 state-dict file)"
        )
    net = torchvision.models.vgg16(weights=None)
    state = torch.load(weights, map_location="cpu", weights_only=True)
    net.load_state_dict(state)
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net


@torch.no_grad()
def forward_activations(net, batch: torch.Tensor) -> dict[str, torch.Tensor]:
    """Run one (B, 3, 224, 224) batch and tap all four export points.

    fc6/fc7 are taken after their ReLU, the usual feature-extraction
    convention; softmax is over the final 1000-way scores.  The dropout
    modules are bypassed entirely, so outputs are deterministic regardless
    of the module's train/eval flag.
    """
    x = net.features(batch)
    pool5 = x  # (B, 512, 7, 7)
    x = torch.flatten(net.avgpool(x), 1)
    cl = net.classifier
    fc6 = cl[1](cl[0](x))
    fc7 = cl[4](cl[3](fc6))
    scores = torch.softmax(cl[6](fc7), dim=1)
    return {"pool5": pool5, "fc6": fc6, "fc7": fc7, "softmax": scores}


def flatten_pool5(pool5) -> np.ndarray:
    """(B, M, a, a) -> (B*a*a, M): each spatial site becomes one row.

    Rows are frame-major then row-major over the a x a grid, so frame f's
    site (r, c) lands at row f*a*a + r*a + c.
    """
    t = torch.as_tensor(pool5)
    b, m, a, a2 = t.shape
    assert a == a2, "pool5 grid must be square"
    return t.permute(0, 2, 3, 1).reshape(b * a * a, m).numpy()
