"""
Collaborative Training Domain Types
"""
from dataclasses import asdict, dataclass
from typing import Dict, Tuple

from apps.backbone.structures import BackboneConfig
from apps.core.exceptions import ConfigurationError
from apps.geometry.structures import DEFAULT_ANCHOR_RATIOS, DEFAULT_ANCHOR_SIZES, AnchorSpec

SCHEDULE_JOINT = 'joint'
SCHEDULE_ALTERNATING = 'alternating'
SCHEDULE_CHOICES = (SCHEDULE_JOINT, SCHEDULE_ALTERNATING)

SCOPE_ALL = 'all'
SCOPE_SURVIVORS = 'survivors'
SCOPE_CHOICES = (SCOPE_ALL, SCOPE_SURVIVORS)


@dataclass(frozen=True)
class TrainConfig:
    """
    Everything needed to build, train and reproduce a model.

    `fusion_dim` of 0 means "same as the backbone feature width".
    """
    # model
    input_size: int = 224
    stage_widths: Tuple[int, ...] = (16, 16, 32, 64, 512)
    extra_widths: Tuple[int, ...] = (128, 128)
    anchor_sizes: Tuple[float, ...] = DEFAULT_ANCHOR_SIZES
    anchor_ratios: Tuple[Tuple[float, float], ...] = DEFAULT_ANCHOR_RATIOS
    num_classes: int = 4
    code_length: int = 32
    fusion_dim: int = 0

    # losses
    triplet_margin: float = 1.0
    localization_margin: float = 0.5
    lambda_cls: float = 1.0
    lambda_rank: float = 1.0
    lambda_loc: float = 1.0
    num_candidates: int = 6
    nms_threshold: float = 0.25
    triplets_per_anchor: int = 8
    localization_scope: str = SCOPE_ALL

    # optimisation
    batch_size: int = 16
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    lr_decay_epochs: int = 45
    lr_decay_factor: float = 0.1
    epochs: int = 60
    localization_warmup_epochs: int = 5
    schedule: str = SCHEDULE_JOINT
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'stage_widths', tuple(self.stage_widths))
        object.__setattr__(self, 'extra_widths', tuple(self.extra_widths))
        object.__setattr__(self, 'anchor_sizes', tuple(self.anchor_sizes))
        object.__setattr__(self, 'anchor_ratios', tuple(tuple(r) for r in self.anchor_ratios))

        if self.triplet_margin <= 0 or self.localization_margin <= 0:
            raise ConfigurationError("Margins must be positive")
        if min(self.lambda_cls, self.lambda_rank, self.lambda_loc) < 0:
            raise ConfigurationError("Loss weights must be non-negative")
        if self.num_candidates < 1:
            raise ConfigurationError("num_candidates must be at least 1")
        if self.localization_warmup_epochs < 0:
            raise ConfigurationError(
                "localization_warmup_epochs must be non-negative", key='localization_warmup_epochs'
            )
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be at least 2")
        if self.schedule not in SCHEDULE_CHOICES:
            raise ConfigurationError(f"Unknown schedule {self.schedule!r}", key='schedule')
        if self.localization_scope not in SCOPE_CHOICES:
            raise ConfigurationError(
                f"Unknown localization scope {self.localization_scope!r}", key='localization_scope'
            )
        # tap and anchor shapes validate themselves on construction
        self.backbone
        self.anchors

    @property
    def backbone(self) -> BackboneConfig:
        return BackboneConfig(
            input_size=self.input_size,
            stage_widths=self.stage_widths,
            extra_widths=self.extra_widths,
        )

    @property
    def anchors(self) -> AnchorSpec:
        return AnchorSpec(sizes=self.anchor_sizes, ratios=self.anchor_ratios)

    @property
    def resolved_fusion_dim(self) -> int:
        return self.fusion_dim or self.backbone.feature_dim

    @property
    def loss_weights(self) -> Dict[str, float]:
        return {'L_cls': self.lambda_cls, 'L_rank': self.lambda_rank, 'L_loc': self.lambda_loc}


@dataclass(frozen=True)
class LocalizationTarget:
    """
    The cell the comparer picked on one layer, as <h, w, r> and flat index.

    `candidates` holds the flat indices of the NMS survivors it was picked from.
    """
    layer_id: int
    grid_index: Tuple[int, int, int]
    flat_index: int
    candidates: Tuple[int, ...] = ()


@dataclass
class LossReport:
    L_cls: float = 0.0
    L_rank: float = 0.0
    L_loc: float = 0.0
    total: float = 0.0
    num_triplets: int = 0

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)
