"""
Collaborative Training Services

The comparer turns NMS survivors into localization targets, the score
heads learn those targets with a hinge loss, and the regions the heads pick
feed the hash-coding pass. All three losses are optimised together.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import torch
from torch.optim import Adam
from torch.optim.lr_scheduler import StepLR

from apps.backbone.services import gap
from apps.comparer.services import (
    check_labels,
    classification_loss,
    column_max,
    select_best_proposal,
    softmax_distribution,
)
from apps.core.exceptions import ConfigurationError, GridIndexError, NonFiniteLossError, NoSurvivorError
from apps.core.utils import append_json_line, seed_everything
from apps.geometry.services import crop_resize, flatten_scores, nms
from apps.geometry.structures import FeatureGrid
from apps.ranker.services import mine_triplets, ranking_loss
from .networks import FineHashNet
from .structures import SCHEDULE_ALTERNATING, SCOPE_SURVIVORS, LocalizationTarget, LossReport, TrainConfig

logger = logging.getLogger(__name__)

LOSS_TERMS = ('L_cls', 'L_rank', 'L_loc')
HASH_TERMS = ('L_cls', 'L_rank')
LOCALIZATION_TERMS = ('L_loc',)


def index_to_hwr(c: int, height: int, width: int, num_anchors: Optional[int] = None) -> Tuple[int, int, int]:
    """
    Invert c = (r-1)*(H*W) + (w-1)*H + h into the 1-based <h, w, r>.
    """
    upper = height * width * num_anchors if num_anchors else None
    if c < 1 or (upper is not None and c > upper):
        raise GridIndexError(
            f"Flat index {c} outside [1, {upper if upper is not None else 'H*W*R'}]",
            flat_index=c, height=height, width=width,
        )
    offset = c - 1
    r, rest = divmod(offset, height * width)
    w, h = divmod(rest, height)
    return h + 1, w + 1, r + 1


def localization_loss(scores: torch.Tensor, target: Tuple[int, int, int], margin: float,
                      cells: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    sum over every other cell of max(0, margin + A(i, j, l) - A(h, w, r)).

    `scores` is one image's (H, W, R) tensor. `cells`, a boolean mask of
    the same shape, restricts the sum to a subset of cells.
    """
    h, w, r = target
    height, width, num_anchors = scores.shape
    if not (1 <= h <= height and 1 <= w <= width and 1 <= r <= num_anchors):
        raise GridIndexError(f"Target {target} outside {height}x{width}x{num_anchors} scores", target=target)

    target_score = scores[h - 1, w - 1, r - 1]
    hinge = torch.clamp(margin + scores - target_score, min=0.0)
    include = torch.ones_like(scores, dtype=torch.bool) if cells is None else cells.clone()
    include[h - 1, w - 1, r - 1] = False
    return torch.where(include, hinge, torch.zeros_like(hinge)).sum()


def survivor_mask(target: LocalizationTarget, grid: FeatureGrid, num_anchors: int) -> torch.Tensor:
    """Boolean (H, W, R) mask of the cells that survived NMS for `target`."""
    mask = torch.zeros(grid.height * grid.width * num_anchors, dtype=torch.bool)
    mask[[c - 1 for c in target.candidates]] = True
    return mask.reshape(num_anchors, grid.width, grid.height).transpose(0, 2)


@torch.no_grad()
def find_targets(model: FineHashNet, image: torch.Tensor, label: int,
                 scores: Sequence[torch.Tensor], config: TrainConfig) -> List[LocalizationTarget]:
    """
    One localization target per layer for a single (3, S, S) image.

    The layer's anchors are scored with A_l, reduced by NMS to the top
    `num_candidates`, zoomed to full size and classified; the survivor the
    comparer rates highest for `label` becomes the target.
    """
    targets = []
    num_anchors = config.anchors.num_anchors
    for grid, A, proposals in zip(model.grids, scores, model.layer_proposals):
        scored = proposals.with_scores(flatten_scores(A.detach()).tolist())
        survivors = nms(scored, config.nms_threshold, config.num_candidates)
        if len(survivors) == 0:
            raise NoSurvivorError(f"NMS left no proposal on layer {grid.layer_id}", layer_id=grid.layer_id)

        crops = torch.stack([crop_resize(image, p.box, model.input_size) for p in survivors])
        features = gap(model.backbone.extract_features(crops).tap1)
        P = model.comparer.class_logits(features)
        winner = survivors[select_best_proposal(P, label) - 1]

        targets.append(LocalizationTarget(
            layer_id=grid.layer_id,
            grid_index=index_to_hwr(winner.flat_index, grid.height, grid.width, num_anchors),
            flat_index=winner.flat_index,
            candidates=tuple(p.flat_index for p in survivors),
        ))
    return targets


def batch_localization_loss(model: FineHashNet, images: torch.Tensor, labels: torch.Tensor,
                            scores: Sequence[torch.Tensor], config: TrainConfig) -> torch.Tensor:
    """
    Hinge loss summed over the three layers, averaged over the batch.
    """
    num_anchors = config.anchors.num_anchors
    per_image = []
    for n in range(images.shape[0]):
        image_scores = [A[n] for A in scores]
        targets = find_targets(model, images[n], int(labels[n]), image_scores, config)
        total = 0.0
        for grid, A, target in zip(model.grids, image_scores, targets):
            cells = survivor_mask(target, grid, num_anchors) if config.localization_scope == SCOPE_SURVIVORS else None
            total = total + localization_loss(A, target.grid_index, config.localization_margin, cells)
        per_image.append(total)
    return torch.stack(per_image).mean()


def train_step(model: FineHashNet, optimizer: torch.optim.Optimizer, images: torch.Tensor,
               labels: torch.Tensor, config: TrainConfig, generator: Optional[torch.Generator] = None,
               terms: Sequence[str] = LOSS_TERMS) -> LossReport:
    """
    One optimizer update on a batch.

    Only terms listed in `terms` with a positive weight enter the total, so
    a zero weight leaves the parameters that only that loss reaches without
    any gradient at all. L_loc is not even computed, and reads 0, when it is
    missing from `terms`.
    """
    labels = check_labels(labels, config.num_classes)
    model.train()
    optimizer.zero_grad(set_to_none=True)

    output = model(images)
    m = softmax_distribution(column_max(output.logits))
    losses: Dict[str, torch.Tensor] = {'L_cls': classification_loss(m, labels)}

    triplets = mine_triplets(labels.tolist(), config.triplets_per_anchor, generator)
    losses['L_rank'] = ranking_loss(output.codes, triplets, config.triplet_margin)
    if 'L_loc' in terms:
        losses['L_loc'] = batch_localization_loss(model, images, labels, output.scores, config)
    else:
        # not scheduled this step
        losses['L_loc'] = torch.zeros(())

    weights = config.loss_weights
    active = [name for name in terms if weights[name] > 0]
    total = sum((weights[name] * losses[name] for name in active), torch.zeros(()))

    report = LossReport(
        L_cls=losses['L_cls'].item(),
        L_rank=losses['L_rank'].item(),
        L_loc=losses['L_loc'].item(),
        total=total.item(),
        num_triplets=len(triplets),
    )
    if not all(torch.isfinite(value) for value in list(losses.values()) + [total]):
        raise NonFiniteLossError("Training step produced a non-finite loss", **report.as_dict())

    if total.requires_grad:
        total.backward()
        optimizer.step()
    return report


class CollaborativeTrainer:
    """
    Epoch loop around `train_step`: seeded data order, Adam with step decay,
    one JSON line per epoch.
    """

    def __init__(self, config: TrainConfig, model: Optional[FineHashNet] = None, log_path=None):
        self.config = config
        self.generator = seed_everything(config.seed)
        self.model = model if model is not None else FineHashNet(config)
        self.optimizer = Adam(self.model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
        self.scheduler = StepLR(self.optimizer, step_size=config.lr_decay_epochs, gamma=config.lr_decay_factor)
        self.log_path = log_path
        self.history: List[Dict] = []

    def terms_for_epoch(self, epoch: int) -> Tuple[str, ...]:
        """
        The first `localization_warmup_epochs` train only the hash-coding
        losses. After that the joint schedule trains everything each epoch;
        alternating starts with the hash-coding losses and switches to
        localization on even epochs.
        """
        if epoch <= self.config.localization_warmup_epochs:
            return HASH_TERMS
        if self.config.schedule != SCHEDULE_ALTERNATING:
            return LOSS_TERMS
        return HASH_TERMS if epoch % 2 == 1 else LOCALIZATION_TERMS

    def batches(self, count: int) -> List[torch.Tensor]:
        order = torch.randperm(count, generator=self.generator)
        return list(torch.split(order, self.config.batch_size))

    def train_epoch(self, images: torch.Tensor, labels: torch.Tensor, epoch: int) -> Dict:
        terms = self.terms_for_epoch(epoch)
        lr = self.optimizer.param_groups[0]['lr']
        reports = [
            train_step(self.model, self.optimizer, images[index], labels[index],
                       self.config, self.generator, terms)
            for index in self.batches(images.shape[0])
        ]
        self.scheduler.step()

        record = {'epoch': epoch, 'lr': lr}
        for key in ('L_cls', 'L_rank', 'L_loc', 'total'):
            record[key] = sum(getattr(report, key) for report in reports) / len(reports)
        return record

    def fit(self, images: torch.Tensor, labels, epochs: Optional[int] = None) -> List[Dict]:
        labels = torch.as_tensor(labels, dtype=torch.long)
        if images.shape[0] != labels.shape[0]:
            raise ConfigurationError(
                f"{images.shape[0]} images but {labels.shape[0]} labels",
            )
        if images.shape[0] == 0:
            raise ConfigurationError("Cannot train on an empty dataset")

        epochs = self.config.epochs if epochs is None else epochs
        start = len(self.history) + 1
        for epoch in range(start, start + epochs):
            record = self.train_epoch(images, labels, epoch)
            self.history.append(record)
            logger.info(
                f"epoch {epoch}: total={record['total']:.4f} L_cls={record['L_cls']:.4f} "
                f"L_rank={record['L_rank']:.4f} L_loc={record['L_loc']:.4f} lr={record['lr']:.2e}"
            )
            if self.log_path:
                append_json_line(self.log_path, record)
        return self.history
