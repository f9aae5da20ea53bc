"""
Ranker Network

Four feature vectors (whole image plus three regions) are projected,
fused by a gated unit and squashed into a b-bit relaxed code.
"""
from typing import Sequence, Tuple

import torch
from torch import nn

from apps.backbone.networks import fan_in_uniform_
from apps.core.exceptions import DimensionMismatchError
from .services import binarize

NUM_SLOTS = 4


class Ranker(nn.Module):

    def __init__(self, feature_dim: int, fusion_dim: int, code_length: int):
        super().__init__()
        self.feature_dim = feature_dim
        self.fusion_dim = fusion_dim
        self.code_length = code_length

        self.projections = nn.ModuleList(nn.Linear(feature_dim, fusion_dim) for _ in range(NUM_SLOTS))
        self.candidates = nn.ModuleList(nn.Linear(fusion_dim, fusion_dim) for _ in range(NUM_SLOTS))
        self.gates = nn.ModuleList(nn.Linear(NUM_SLOTS * fusion_dim, fusion_dim) for _ in range(NUM_SLOTS))
        self.code_layer = nn.Linear(fusion_dim, code_length)
        fan_in_uniform_(self)

    def project(self, f: torch.Tensor, slot: int) -> torch.Tensor:
        """f -> f_hat with the parameters of input slot 0..3."""
        return self.projections[slot](f)

    def gated_fuse(self, projected: Sequence[torch.Tensor], return_gates: bool = False):
        """
        h = sum_i tanh(W_i f_hat_i + b_i) * sigmoid(W_zi [f_hat_0; ..; f_hat_3] + b_zi)
        """
        if len(projected) != NUM_SLOTS:
            raise DimensionMismatchError(f"Gated fusion takes {NUM_SLOTS} inputs, got {len(projected)}")
        if any(v.shape[-1] != self.fusion_dim for v in projected):
            raise DimensionMismatchError(
                f"Fusion inputs must all have length {self.fusion_dim}",
                lengths=[int(v.shape[-1]) for v in projected],
            )

        concat = torch.cat(list(projected), dim=-1)
        gates = [torch.sigmoid(gate(concat)) for gate in self.gates]
        fused = sum(
            torch.tanh(candidate(v)) * z
            for candidate, v, z in zip(self.candidates, projected, gates)
        )
        if return_gates:
            return fused, gates
        return fused

    def hash_head(self, h: torch.Tensor) -> torch.Tensor:
        """Relaxed code u = tanh(W h + beta), entries in (-1, 1)."""
        return torch.tanh(self.code_layer(h))

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """
        (..., 4, feature_dim) feature stack -> (..., code_length) relaxed codes.
        """
        if features.shape[-2] != NUM_SLOTS or features.shape[-1] != self.feature_dim:
            raise DimensionMismatchError(
                f"Ranker expects (..., {NUM_SLOTS}, {self.feature_dim}) features, got {tuple(features.shape)}"
            )
        projected = [self.project(features[..., slot, :], slot) for slot in range(NUM_SLOTS)]
        return self.hash_head(self.gated_fuse(projected))

    def encode(self, features: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        u = self.forward(features)
        return u, binarize(u)
