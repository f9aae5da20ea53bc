"""
FineHash Network

The backbone, comparer and ranker wired together: a localization pass on
the whole image picks one region per tap, the regions are zoomed back to
full input size, and the hash-coding pass turns the whole image plus the
three regions into a relaxed code.
"""
from dataclasses import dataclass
from typing import List, Tuple

import torch
from torch import nn

from apps.backbone.networks import Backbone
from apps.backbone.services import CheckpointService, gap
from apps.backbone.structures import FeatureMaps
from apps.comparer.networks import Comparer
from apps.geometry.services import crop_resize, generate_anchors
from apps.geometry.structures import Proposal, ProposalSet
from apps.ranker.networks import Ranker
from apps.ranker.services import binarize
from .selection import select_region_proposals
from .serializers import TrainConfigSerializer
from .structures import TrainConfig


@dataclass
class ForwardOutput:
    maps: FeatureMaps
    scores: Tuple[torch.Tensor, torch.Tensor, torch.Tensor]
    regions: List[Tuple[Proposal, Proposal, Proposal]]
    features: torch.Tensor
    logits: torch.Tensor
    codes: torch.Tensor


class FineHashNet(nn.Module):

    def __init__(self, config: TrainConfig):
        super().__init__()
        self.config = config
        backbone_config = config.backbone
        self.backbone = Backbone(backbone_config, config.anchors.num_anchors)
        self.comparer = Comparer(backbone_config.feature_dim, config.num_classes)
        self.ranker = Ranker(backbone_config.feature_dim, config.resolved_fusion_dim, config.code_length)

        self.grids = backbone_config.grids()
        anchors = generate_anchors(self.grids, config.anchors)
        self.layer_proposals: List[ProposalSet] = [anchors.for_layer(grid.layer_id) for grid in self.grids]

    @property
    def input_size(self) -> int:
        return self.config.input_size

    def localize(self, images: torch.Tensor):
        maps = self.backbone.extract_features(images)
        return maps, self.backbone.localization_scores(maps)

    def select_regions(self, scores) -> List[Tuple[Proposal, Proposal, Proposal]]:
        return [
            select_region_proposals(tuple(A[n] for A in scores), self.layer_proposals)
            for n in range(scores[0].shape[0])
        ]

    def zoom_regions(self, images: torch.Tensor, regions) -> torch.Tensor:
        """(N, 3, C, S, S) crops of every selected region, resized to the input size."""
        return torch.stack([
            torch.stack([crop_resize(image, proposal.box, self.input_size) for proposal in picked])
            for image, picked in zip(images, regions)
        ])

    def hash_features(self, maps: FeatureMaps, crops: torch.Tensor) -> torch.Tensor:
        """
        (N, 4, feature_dim): whole-image feature first, then the three regions.
        """
        batch = crops.shape[0]
        whole = gap(maps.tap1)
        region_maps = self.backbone.extract_features(crops.flatten(0, 1))
        regions = gap(region_maps.tap1).view(batch, 3, -1)
        return torch.cat([whole.unsqueeze(1), regions], dim=1)

    def forward(self, images: torch.Tensor) -> ForwardOutput:
        maps, scores = self.localize(images)
        regions = self.select_regions(scores)
        crops = self.zoom_regions(images, regions)
        features = self.hash_features(maps, crops)
        return ForwardOutput(
            maps=maps,
            scores=scores,
            regions=regions,
            features=features,
            logits=self.comparer.class_logits(features),
            codes=self.ranker(features),
        )

    @torch.no_grad()
    def encode(self, images: torch.Tensor, batch_size: int = 16) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Relaxed and binary codes for a stack of images, in input order.
        """
        was_training = self.training
        self.eval()
        codes = []
        for start in range(0, images.shape[0], batch_size):
            codes.append(self.forward(images[start:start + batch_size]).codes)
        self.train(was_training)
        relaxed = torch.cat(codes) if codes else torch.zeros((0, self.config.code_length))
        return relaxed, binarize(relaxed)

    @torch.no_grad()
    def locate(self, images: torch.Tensor) -> List[Tuple[Proposal, Proposal, Proposal]]:
        _, scores = self.localize(images)
        return self.select_regions(scores)

    def save(self, path, extra=None):
        return CheckpointService.save(self, path, TrainConfigSerializer.dump(self.config), extra)

    @classmethod
    def from_checkpoint(cls, path) -> 'FineHashNet':
        archive = CheckpointService.load(path)
        model = cls(TrainConfigSerializer.parse(archive.config))
        CheckpointService.restore(model, archive)
        model.eval()
        return model
