"""
Backbone Domain Types
"""
import math
from dataclasses import dataclass
from typing import List, Tuple

import torch

from apps.core.exceptions import ConfigurationError
from apps.geometry.structures import FeatureGrid


def downsampled(size: int, steps: int) -> int:
    """Spatial size after `steps` stride-2, padding-1, 3x3 convolutions."""
    for _ in range(steps):
        size = math.ceil(size / 2)
    return size


@dataclass(frozen=True)
class BackboneConfig:
    """
    Shape of the reduced-depth feature extractor.

    `stage_widths` are the stride-2 stages leading to the first tap; the
    two `extra_widths` stages produce the second and third taps. The
    defaults give 7x7x512, 4x4x128 and 2x2x128 on a 224 input.
    """
    input_size: int = 224
    stage_widths: Tuple[int, ...] = (16, 16, 32, 64, 512)
    extra_widths: Tuple[int, ...] = (128, 128)
    in_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, 'stage_widths', tuple(self.stage_widths))
        object.__setattr__(self, 'extra_widths', tuple(self.extra_widths))
        if self.input_size < 1:
            raise ConfigurationError(f"input_size must be positive, got {self.input_size}")
        if not self.stage_widths or len(self.extra_widths) != 2:
            raise ConfigurationError(
                "Backbone needs at least one stage and exactly two extra stages (three taps)",
                stage_widths=self.stage_widths, extra_widths=self.extra_widths,
            )
        if any(width < 1 for width in self.stage_widths + self.extra_widths):
            raise ConfigurationError("Channel widths must be positive")
        sizes = self.tap_sizes
        if not (sizes[0] > sizes[1] > sizes[2]):
            raise ConfigurationError(f"Tap sizes must strictly decrease, got {sizes}", tap_sizes=sizes)

    @property
    def tap_sizes(self) -> Tuple[int, int, int]:
        first = downsampled(self.input_size, len(self.stage_widths))
        return first, downsampled(first, 1), downsampled(first, 2)

    @property
    def tap_channels(self) -> Tuple[int, int, int]:
        return self.stage_widths[-1], self.extra_widths[0], self.extra_widths[1]

    @property
    def tap_strides(self) -> Tuple[float, float, float]:
        return tuple(self.input_size / size for size in self.tap_sizes)

    @property
    def feature_dim(self) -> int:
        return self.stage_widths[-1]

    def grids(self) -> List[FeatureGrid]:
        return [
            FeatureGrid(layer_id, size, size, self.input_size)
            for layer_id, size in enumerate(self.tap_sizes, start=1)
        ]


@dataclass
class FeatureMaps:
    """
    The three tap outputs, batched and channels-first: (N, C, H, W).
    """
    tap1: torch.Tensor
    tap2: torch.Tensor
    tap3: torch.Tensor

    def __iter__(self):
        return iter((self.tap1, self.tap2, self.tap3))

    def shapes_hwc(self) -> List[Tuple[int, int, int]]:
        """Per-tap (H, W, C) of a single image."""
        return [(t.shape[-2], t.shape[-1], t.shape[-3]) for t in self]
