"""Fixed seeded convolutional feature extractor for the RGB and depth streams.

Stand-in for a pretrained deep backbone at desk scale: two parallel stacks of
stride-2 3x3 convolutions with ReLU, weights drawn once from a seed and then
frozen. Shallow features are tapped at stride 4, deep features at stride 16.
He-uniform weights keep activation variance roughly constant through the
stack so correlation responses stay at a usable scale.
"""

from dataclasses import dataclass

import numpy as np

from .fusion import FeatureGeometry
from .tensor import Tensor, conv2d, relu

SHALLOW_STRIDE = 4
DEEP_STRIDE = 16

_STAGE_CHANNELS = (8, 32, 64, 64)  # shallow tap after stage 2, deep tap after stage 4
_SHALLOW_TAP = 1
SHALLOW_CHANNELS = _STAGE_CHANNELS[_SHALLOW_TAP]
DEEP_CHANNELS = _STAGE_CHANNELS[-1]


@dataclass
class BackboneFeatures:
    rgb_shallow: Tensor
    depth_shallow: Tensor
    rgb_deep: Tensor
    depth_deep: Tensor


def _he_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _conv_size(n, stride=2):
    return (n + 2 - 3) // stride + 1


def feature_geometry(image_size):
    """Shallow/deep tap shapes for a given (H, W) image."""
    h, w = image_size
    for _ in range(_SHALLOW_TAP + 1):
        h, w = _conv_size(h), _conv_size(w)
    shallow = (h, w)
    for _ in range(len(_STAGE_CHANNELS) - _SHALLOW_TAP - 1):
        h, w = _conv_size(h), _conv_size(w)
    return FeatureGeometry(
        shallow_channels=SHALLOW_CHANNELS,
        shallow_size=shallow,
        deep_channels=DEEP_CHANNELS,
        deep_size=(h, w),
    )


class Backbone:
    """Two frozen conv stacks; RGB input has 3 channels, depth has 1."""

    def __init__(self, seed):
        rng = np.random.default_rng([seed, 10])
        self.rgb_stages = self._build(rng, 3)
        self.depth_stages = self._build(rng, 1)

    @staticmethod
    def _build(rng, in_channels):
        stages = []
        c = in_channels
        for out_c in _STAGE_CHANNELS:
            kernel = Tensor(_he_uniform(rng, (out_c, c, 3, 3), c * 9))
            bias = Tensor.zeros((out_c,))
            stages.append((kernel, bias))
            c = out_c
        return stages

    @staticmethod
    def _run(stages, x):
        taps = []
        h = x
        for i, (kernel, bias) in enumerate(stages):
            h = relu(conv2d(h, kernel, bias, stride=2, padding=1))
            if i == _SHALLOW_TAP:
                taps.append(h)
        taps.append(h)
        return taps  # [shallow, deep]

    def extract(self, frame):
        """Shallow and deep feature maps for one RGB-D frame."""
        rgb_shallow, rgb_deep = self._run(self.rgb_stages, frame.rgb)
        depth_shallow, depth_deep = self._run(self.depth_stages, frame.depth)
        return BackboneFeatures(
            rgb_shallow=rgb_shallow,
            depth_shallow=depth_shallow,
            rgb_deep=rgb_deep,
            depth_deep=depth_deep,
        )
