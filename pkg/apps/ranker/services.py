"""
Ranker Services
"""
import logging
from typing import Optional, Sequence

import torch

from apps.core.exceptions import ConfigurationError, DimensionMismatchError
from .structures import TripletBatch

logger = logging.getLogger(__name__)


def binarize(u: torch.Tensor) -> torch.Tensor:
    """
    Element-wise sign with sign(0) = +1.
    """
    return torch.where(u >= 0, torch.ones_like(u), -torch.ones_like(u))


def triplet_loss(u_i: torch.Tensor, u_j: torch.Tensor, u_k: torch.Tensor, margin: float) -> torch.Tensor:
    """
    max(0, margin + ||u_i - u_j|| - ||u_i - u_k||), element-wise over leading axes.
    """
    if not (u_i.shape == u_j.shape == u_k.shape):
        raise DimensionMismatchError(
            "Triplet codes must share a shape",
            shapes=[tuple(u_i.shape), tuple(u_j.shape), tuple(u_k.shape)],
        )
    if margin <= 0:
        raise ConfigurationError(f"Triplet margin must be positive, got {margin}")
    positive = torch.linalg.vector_norm(u_i - u_j, dim=-1)
    negative = torch.linalg.vector_norm(u_i - u_k, dim=-1)
    return torch.clamp(margin + positive - negative, min=0.0)


def mine_triplets(labels: Sequence[int], per_anchor: int = 8,
                  generator: Optional[torch.Generator] = None) -> TripletBatch:
    """
    Every valid in-batch triple, capped at `per_anchor` per anchor.

    When an anchor has more candidates than the cap, a uniform sample
    without replacement is drawn from `generator`; the kept triples stay
    in enumeration order.
    """
    if per_anchor < 1:
        raise ConfigurationError(f"Triplets per anchor must be at least 1, got {per_anchor}")
    labels = [int(label) for label in labels]

    triples = []
    for i, anchor_label in enumerate(labels):
        positives = [j for j, label in enumerate(labels) if label == anchor_label and j != i]
        negatives = [k for k, label in enumerate(labels) if label != anchor_label]
        candidates = [(i, j, k) for j in positives for k in negatives]
        if len(candidates) > per_anchor:
            chosen = torch.randperm(len(candidates), generator=generator)[:per_anchor]
            candidates = [candidates[index] for index in sorted(chosen.tolist())]
        triples.extend(candidates)

    return TripletBatch(tuple(triples))


def ranking_loss(codes: torch.Tensor, triplets: TripletBatch, margin: float) -> torch.Tensor:
    """
    Mean triplet loss over a batch of relaxed codes; zero when no triple exists.
    """
    if len(triplets) == 0:
        return codes.sum() * 0.0
    index = triplets.as_tensor()
    losses = triplet_loss(codes[index[:, 0]], codes[index[:, 1]], codes[index[:, 2]], margin)
    return losses.mean()
