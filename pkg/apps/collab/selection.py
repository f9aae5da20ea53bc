"""
Region Selection

The per-layer argmax that turns score tensors into the regions fed to the
hash-coding pass. The comparer is not involved, so the same selection runs
in training and at encode time.
"""
from typing import Sequence, Tuple

import torch

from apps.geometry.services import flatten_scores
from apps.geometry.structures import BoundingBox, Proposal, ProposalSet


def select_region_proposals(scores: Sequence[torch.Tensor],
                            layer_proposals: Sequence[ProposalSet]) -> Tuple[Proposal, ...]:
    """
    Per layer, the proposal of the largest score; lowest flat index on ties.
    """
    picked = []
    for A, proposals in zip(scores, layer_proposals):
        flat = flatten_scores(A.detach())
        picked.append(proposals[int(torch.argmax(flat))])
    return tuple(picked)


def select_regions(scores: Sequence[torch.Tensor],
                   layer_proposals: Sequence[ProposalSet]) -> Tuple[BoundingBox, ...]:
    return tuple(proposal.box for proposal in select_region_proposals(scores, layer_proposals))
