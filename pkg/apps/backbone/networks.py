"""
Backbone Networks

A small convolutional stack standing in for a pretrained trunk, with three
tap points and a 1x1 localization score head on each.
"""
import math
from typing import Tuple

import torch
from torch import nn

from apps.core.exceptions import ConfigurationError
from .structures import BackboneConfig, FeatureMaps


def fan_in_uniform_(module: nn.Module, gain: float = 1.0) -> nn.Module:
    """
    Uniform(-b, b) weights with b = gain * sqrt(3 / fan_in); zero biases.
    """
    for layer in module.modules():
        if isinstance(layer, (nn.Conv2d, nn.Linear)):
            fan_in = layer.weight[0].numel()
            bound = gain * math.sqrt(3.0 / fan_in)
            nn.init.uniform_(layer.weight, -bound, bound)
            if layer.bias is not None:
                nn.init.zeros_(layer.bias)
    return module


def conv_stage(in_channels: int, out_channels: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=2, padding=1),
        nn.ReLU(),
    )


class Backbone(nn.Module):
    """
    Shared feature extractor for the localization and hash-coding passes.
    """

    def __init__(self, config: BackboneConfig, num_anchors: int):
        super().__init__()
        self.config = config
        self.num_anchors = num_anchors

        stages = []
        in_channels = config.in_channels
        for width in config.stage_widths:
            stages.append(conv_stage(in_channels, width))
            in_channels = width
        self.trunk = nn.Sequential(*stages)

        self.extra = nn.ModuleList()
        for width in config.extra_widths:
            self.extra.append(conv_stage(in_channels, width))
            in_channels = width

        self.score_heads = nn.ModuleList(
            nn.Conv2d(channels, num_anchors, kernel_size=1) for channels in config.tap_channels
        )
        self.reset_parameters()

    def reset_parameters(self):
        fan_in_uniform_(self.trunk, gain=math.sqrt(2.0))
        fan_in_uniform_(self.extra, gain=math.sqrt(2.0))
        fan_in_uniform_(self.score_heads)

    def extract_features(self, images: torch.Tensor) -> FeatureMaps:
        """
        Map normalised (N, 3, S, S) images to the three tap feature maps.
        """
        expected = (self.config.in_channels, self.config.input_size, self.config.input_size)
        if images.dim() != 4 or tuple(images.shape[1:]) != expected:
            raise ConfigurationError(
                f"Backbone expects (N, {expected[0]}, {expected[1]}, {expected[2]}) input, "
                f"got {tuple(images.shape)}",
                expected=expected, received=tuple(images.shape),
            )
        tap1 = self.trunk(images)
        tap2 = self.extra[0](tap1)
        tap3 = self.extra[1](tap2)
        return FeatureMaps(tap1, tap2, tap3)

    def forward(self, images: torch.Tensor) -> FeatureMaps:
        return self.extract_features(images)

    def localization_scores(self, maps: FeatureMaps) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """
        Per-tap score tensors A_l, laid out (N, H, W, R).
        """
        return tuple(
            head(feature_map).permute(0, 2, 3, 1)
            for head, feature_map in zip(self.score_heads, maps)
        )
