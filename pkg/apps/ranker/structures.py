"""
Ranker Domain Types
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import torch

from apps.core.exceptions import InvalidLabelError


@dataclass(frozen=True)
class TripletBatch:
    """
    0-based in-batch index triples (i, j, k) with label(i) == label(j) != label(k).
    """
    triples: Tuple[Tuple[int, int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)

    def as_tensor(self) -> torch.Tensor:
        if not self.triples:
            return torch.zeros((0, 3), dtype=torch.long)
        return torch.tensor(self.triples, dtype=torch.long)

    def validate(self, labels: Sequence[int]) -> 'TripletBatch':
        for i, j, k in self.triples:
            if not (labels[i] == labels[j] != labels[k]) or i == j:
                raise InvalidLabelError(
                    f"Triple ({i}, {j}, {k}) violates the label relation",
                    triple=(i, j, k),
                )
        return self
