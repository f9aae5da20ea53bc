"""
Comparer Services

Column-wise max pooling over the label matrix, softmax, the classification
loss and the row pick used to manufacture localization targets. Labels are
1-based everywhere outside this module's tensor indexing.
"""
from typing import Union

import torch

from apps.core.exceptions import DimensionMismatchError, InvalidLabelError

Label = Union[int, torch.Tensor]


def column_max(P: torch.Tensor) -> torch.Tensor:
    """
    p(c) = max over rows of P(., c), for (..., N, C) input.

    Gradient reaches only the arg-max row of each column, the first one on ties.
    """
    if P.dim() < 2 or P.shape[-2] < 1:
        raise DimensionMismatchError(f"column_max needs at least one row, got shape {tuple(P.shape)}")
    rows = torch.argmax(P, dim=-2, keepdim=True)
    return torch.gather(P, -2, rows).squeeze(-2)


def softmax_distribution(p: torch.Tensor) -> torch.Tensor:
    return torch.softmax(p, dim=-1)


def check_labels(y: Label, num_classes: int) -> torch.Tensor:
    labels = torch.as_tensor(y, dtype=torch.long)
    if labels.numel() == 0 or labels.min() < 1 or labels.max() > num_classes:
        raise InvalidLabelError(
            f"Labels must lie in [1, {num_classes}], got {labels.tolist()}",
            num_classes=num_classes,
        )
    return labels


def classification_loss(m: torch.Tensor, y: Label) -> torch.Tensor:
    """
    -log(m(y) / sum_c m(c)), averaged over a batch when m is (B, C).

    The denominator is evaluated even though softmax output sums to one.
    """
    labels = check_labels(y, m.shape[-1])
    if m.dim() == 1:
        m = m.unsqueeze(0)
        labels = labels.reshape(1)
    m_y = torch.gather(m, -1, (labels - 1).unsqueeze(-1)).squeeze(-1)
    tiny = torch.finfo(m.dtype).tiny
    losses = -(torch.log(m_y.clamp_min(tiny)) - torch.log(m.sum(dim=-1)))
    return losses.mean()


def select_best_proposal(P: torch.Tensor, y: int) -> int:
    """
    1-based row whose score in column y is largest; lowest row on ties.
    """
    if P.dim() != 2 or P.shape[0] < 1:
        raise DimensionMismatchError(f"Expected a non-empty (N, C) matrix, got shape {tuple(P.shape)}")
    label = int(check_labels(y, P.shape[1]))
    return int(torch.argmax(P.detach()[:, label - 1])) + 1
