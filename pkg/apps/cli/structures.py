"""
Dataset Domain Types
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

from apps.core.exceptions import ConfigurationError, ManifestError
from apps.geometry.structures import BoundingBox

SPLIT_TRAIN = 'train'
SPLIT_QUERY = 'query'
SPLIT_DATABASE = 'database'
SPLIT_CHOICES = (SPLIT_TRAIN, SPLIT_QUERY, SPLIT_DATABASE)

MANIFEST_HEADER = ('path', 'label')
GLYPH_HEADER = ('path', 'label', 'x_min', 'y_min', 'x_max', 'y_max')


@dataclass(frozen=True)
class ManifestRow:
    path: Path
    label: int


@dataclass(frozen=True)
class DatasetManifest:
    """
    Labelled image list for one split. Labels cover 1..C without gaps.
    """
    rows: Tuple[ManifestRow, ...]
    split: str = SPLIT_TRAIN

    def __post_init__(self):
        object.__setattr__(self, 'rows', tuple(self.rows))
        if self.split not in SPLIT_CHOICES:
            raise ManifestError(f"Unknown split {self.split!r}", split=self.split)
        if not self.rows:
            raise ManifestError("Manifest has no rows", split=self.split)
        labels = sorted({row.label for row in self.rows})
        if labels[0] != 1 or labels != list(range(1, labels[-1] + 1)):
            raise ManifestError(
                f"Labels must form a contiguous range starting at 1, got {labels}",
                labels=labels,
            )

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def num_classes(self) -> int:
        return max(row.label for row in self.rows)

    @property
    def paths(self) -> List[Path]:
        return [row.path for row in self.rows]

    @property
    def labels(self) -> List[int]:
        return [row.label for row in self.rows]


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Planted-glyph dataset: every image shares one global shape, and the
    class is decided only by a small glyph drawn at a random position.
    """
    num_classes: int = 4
    train_per_class: int = 16
    query_per_class: int = 8
    canvas_size: int = 224
    glyph_size: int = 32
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigurationError("A synthetic dataset needs at least two classes")
        if self.train_per_class < 1 or self.query_per_class < 0:
            raise ConfigurationError("Images per class must be positive")
        if not 4 <= self.glyph_size <= self.canvas_size:
            raise ConfigurationError(
                f"Glyph size {self.glyph_size} must lie in [4, {self.canvas_size}]",
                glyph_size=self.glyph_size,
            )
        if not 0.0 <= self.noise <= 1.0:
            raise ConfigurationError(f"Noise level must lie in [0, 1], got {self.noise}")


@dataclass
class SyntheticDataset:
    root: Path
    manifests: Dict[str, Path] = field(default_factory=dict)
    glyphs: Path = None
    counts: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class GlyphRecord:
    path: Path
    label: int
    box: BoundingBox
