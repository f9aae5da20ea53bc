"""
Comparer Network
"""
import torch
from torch import nn

from apps.backbone.networks import fan_in_uniform_
from apps.core.exceptions import DimensionMismatchError


class Comparer(nn.Module):
    """
    Single fully connected layer scoring feature vectors against C labels.

    The same weights score every row, whether the rows are the whole image
    plus three regions or a stack of NMS survivors.
    """

    def __init__(self, feature_dim: int, num_classes: int):
        super().__init__()
        self.feature_dim = feature_dim
        self.num_classes = num_classes
        self.classifier = nn.Linear(feature_dim, num_classes)
        fan_in_uniform_(self.classifier)

    def class_logits(self, features) -> torch.Tensor:
        """
        Map (..., N, feature_dim) features to the (..., N, C) label matrix P.

        A list of 1-D vectors is stacked into an (N, feature_dim) matrix first.
        """
        if isinstance(features, (list, tuple)):
            features = torch.stack(list(features))
        if features.shape[-1] != self.feature_dim:
            raise DimensionMismatchError(
                f"Comparer expects {self.feature_dim}-d features, got {features.shape[-1]}",
                expected=self.feature_dim, received=int(features.shape[-1]),
            )
        return self.classifier(features)

    def forward(self, features) -> torch.Tensor:
        return self.class_logits(features)
