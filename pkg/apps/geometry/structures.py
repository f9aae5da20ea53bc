"""
Region Geometry Domain Types

Boxes live on a square input canvas (default 224 x 224) in pixel
coordinates. Grid indices <h, w, r> are 1-based throughout.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, List, Sequence, Tuple

from apps.core.exceptions import ConfigurationError, DegenerateBoxError

DEFAULT_INPUT_SIZE = 224
DEFAULT_ANCHOR_SIZES = (32, 48, 96)
DEFAULT_ANCHOR_RATIOS = ((1, 1), (2, 3), (3, 2))
DEFAULT_GRID_SIZES = (7, 4, 2)

CSV_HEADER = ('layer_id', 'h', 'w', 'r', 'x_min', 'y_min', 'x_max', 'y_max', 'score')


@dataclass(frozen=True)
class BoundingBox:
    """
    Axis-aligned box with x_min < x_max and y_min < y_max.
    """
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBoxError(
                f"Box has no area: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})",
                box=self.as_tuple(),
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def clip(self, size: float) -> 'BoundingBox':
        """
        Clip to the [0, size] canvas; raises DegenerateBoxError if nothing is left.
        """
        return BoundingBox(
            max(0.0, min(self.x_min, size)),
            max(0.0, min(self.y_min, size)),
            max(0.0, min(self.x_max, size)),
            max(0.0, min(self.y_max, size)),
        )

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, height: float) -> 'BoundingBox':
        return cls(cx - width / 2.0, cy - height / 2.0, cx + width / 2.0, cy + height / 2.0)


@dataclass(frozen=True)
class AnchorSpec:
    """
    Anchor sizes (side length in pixels) and height:width ratios.

    Anchor index r enumerates sizes in the outer loop and ratios in the
    inner loop, so r = size_index * len(ratios) + ratio_index + 1.
    """
    sizes: Tuple[float, ...] = DEFAULT_ANCHOR_SIZES
    ratios: Tuple[Tuple[float, float], ...] = DEFAULT_ANCHOR_RATIOS

    def __post_init__(self):
        if not self.sizes or not self.ratios:
            raise ConfigurationError("Anchor spec needs at least one size and one ratio")
        if any(size <= 0 for size in self.sizes):
            raise ConfigurationError(f"Anchor sizes must be positive: {self.sizes}")
        if any(len(ratio) != 2 or ratio[0] <= 0 or ratio[1] <= 0 for ratio in self.ratios):
            raise ConfigurationError(f"Anchor ratios must be positive pairs: {self.ratios}")

    @property
    def num_anchors(self) -> int:
        return len(self.sizes) * len(self.ratios)

    def shapes(self) -> List[Tuple[float, float]]:
        """
        (height, width) per anchor index, area preserved at size**2.
        """
        shapes = []
        for size in self.sizes:
            for a, b in self.ratios:
                shapes.append((size * math.sqrt(a / b), size * math.sqrt(b / a)))
        return shapes


@dataclass(frozen=True)
class FeatureGrid:
    layer_id: int
    height: int
    width: int
    input_size: int = DEFAULT_INPUT_SIZE

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigurationError(f"Feature grid must be non-empty: {self.height}x{self.width}")

    @property
    def stride(self) -> float:
        return self.input_size / self.height

    @property
    def offset(self) -> float:
        return self.stride / 2.0

    @property
    def num_cells(self) -> int:
        return self.height * self.width


def default_grids(input_size: int = DEFAULT_INPUT_SIZE, sizes: Sequence[int] = DEFAULT_GRID_SIZES) -> List[FeatureGrid]:
    return [FeatureGrid(layer_id, size, size, input_size) for layer_id, size in enumerate(sizes, start=1)]


@dataclass(frozen=True)
class Proposal:
    box: BoundingBox
    score: float
    layer_id: int
    grid_index: Tuple[int, int, int]
    flat_index: int

    def with_score(self, score: float) -> 'Proposal':
        return replace(self, score=float(score))

    def to_row(self) -> Tuple:
        h, w, r = self.grid_index
        return (self.layer_id, h, w, r, *self.box.as_tuple(), self.score)


@dataclass(frozen=True)
class ProposalSet:
    """
    Ordered, immutable collection of proposals.

    Sets built by `generate_anchors` are ordered by layer and then by
    flat index, which is the order `flatten_scores` produces.
    """
    proposals: Tuple[Proposal, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'proposals', tuple(self.proposals))

    def __len__(self) -> int:
        return len(self.proposals)

    def __iter__(self) -> Iterator[Proposal]:
        return iter(self.proposals)

    def __getitem__(self, index) -> Proposal:
        return self.proposals[index]

    @property
    def layer_ids(self) -> List[int]:
        return sorted({proposal.layer_id for proposal in self.proposals})

    def for_layer(self, layer_id: int) -> 'ProposalSet':
        return ProposalSet(tuple(p for p in self.proposals if p.layer_id == layer_id))

    def with_scores(self, scores: Sequence[float]) -> 'ProposalSet':
        """
        Replace scores position by position.
        """
        if len(scores) != len(self.proposals):
            raise ConfigurationError(
                f"Expected {len(self.proposals)} scores, got {len(scores)}"
            )
        return ProposalSet(tuple(p.with_score(s) for p, s in zip(self.proposals, scores)))

    def rows(self) -> List[Tuple]:
        return [proposal.to_row() for proposal in self.proposals]
