import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from priocast.convnet import (
    Activation,
    ConvNetSpec,
    LayerKind,
    LayerSpec,
    Precision,
    Role,
)


def random_conv_layer(rng, kind, in_ch, out_ch, kernel, stride, scale=1.0):
    n = out_ch * in_ch * kernel * kernel
    return LayerSpec(
        kind=kind,
        in_ch=in_ch,
        out_ch=out_ch,
        kernel=kernel,
        stride=stride,
        weights=(rng.random(n) * 2.0 - 1.0) * scale,
        bias=(rng.random(out_ch) * 2.0 - 1.0) * scale,
    )


def small_net(rng, in_ch=3, mid=4, out=2, kernel=3, stride=2, role=Role.ENCODER):
    return ConvNetSpec(
        role=role,
        precision=Precision.FLOAT32,
        layers=[
            random_conv_layer(rng, LayerKind.CONV, in_ch, mid, kernel, stride),
            LayerSpec(kind=LayerKind.ACTIVATION, in_ch=mid, out_ch=mid, activation=Activation.RELU),
            random_conv_layer(rng, LayerKind.CONV, mid, out, kernel, 1),
        ],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_bitstream(rng, channels=3, side=16, entropy=0, g=0.2, payload=48):
    from priocast.codec import CodecConfig, serialize
    from priocast.saliency import SaliencyMap

    z = rng.random((channels, side, side)) * 2.0 - 1.0
    sal = SaliencyMap(array=rng.random((side, side)))
    config = CodecConfig(g=g, entropy=entropy, payload_bytes=payload)
    return z, sal, serialize(z, sal, config)


def blob_image(rng, side=128, channels=3, n_blobs=3, noise=0.04):
    """Synthetic test image: a dim background with a few bright Gaussian
    blobs, so saliency detectors find localized structure."""
    yy, xx = np.mgrid[0:side, 0:side]
    img = np.full((channels, side, side), 0.08)
    img += rng.random((channels, side, side)) * noise
    for _ in range(n_blobs):
        cy, cx = rng.integers(side // 4, 3 * side // 4, size=2)
        sig = rng.uniform(side / 16, side / 8)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig**2))
        for c in range(channels):
            img[c] += blob * rng.uniform(0.4, 0.8)
    return np.clip(img, 0.0, 1.0)
