"""
Retrieval Domain Types

Codes are stored packed: bit k of a code lives in 64-bit word k // 64 at
position k % 64, set when the code's k-th entry is +1.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from apps.core.exceptions import CodeFormatError, DimensionMismatchError, InvalidLabelError

WORD_BITS = 64


def words_for(code_length: int) -> int:
    return -(-code_length // WORD_BITS)


@dataclass(frozen=True, eq=False)
class CodeDatabase:
    """
    Immutable packed codes with one label per code.
    """
    words: np.ndarray
    labels: np.ndarray
    code_length: int

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if words.ndim != 2 or words.shape[1] != words_for(self.code_length):
            raise CodeFormatError(
                f"Expected (n, {words_for(self.code_length)}) packed words for {self.code_length}-bit codes, "
                f"got {words.shape}",
            )
        if labels.shape != (words.shape[0],):
            raise DimensionMismatchError(
                f"{words.shape[0]} codes but {labels.shape[0] if labels.ndim else 0} labels"
            )
        if labels.size and labels.min() < 1:
            raise InvalidLabelError("Database labels must be positive", minimum=int(labels.min()))
        words.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, 'words', words)
        object.__setattr__(self, 'labels', labels)

    def __len__(self) -> int:
        return self.words.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeDatabase):
            return NotImplemented
        return (
            self.code_length == other.code_length
            and np.array_equal(self.words, other.words)
            and np.array_equal(self.labels, other.labels)
        )

    def __getitem__(self, index) -> 'CodeDatabase':
        index = np.atleast_1d(np.arange(len(self))[index])
        return CodeDatabase(self.words[index], self.labels[index], self.code_length)


@dataclass(frozen=True, eq=False)
class RankedResult:
    """
    Database positions ordered by Hamming distance, ascending position on ties.
    """
    indices: np.ndarray
    distances: np.ndarray
    labels: np.ndarray
    query_label: Optional[int] = None

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def relevant(self) -> Optional[np.ndarray]:
        if self.query_label is None:
            return None
        return self.labels == self.query_label

    def rows(self) -> List[Dict]:
        return [
            {'rank': rank, 'index': int(i), 'distance': int(d), 'label': int(label)}
            for rank, (i, d, label) in enumerate(zip(self.indices, self.distances, self.labels), start=1)
        ]


@dataclass
class RetrievalMetrics:
    code_length: int
    num_queries: int
    database_size: int
    map: float
    p_at_radius: float
    radius: int
    pr_curve: List[Tuple[float, float]] = field(default_factory=list)
    topn_curve: List[Tuple[int, float]] = field(default_factory=list)
    radius_curve: List[Tuple[int, float, float]] = field(default_factory=list)
    skipped_queries: int = 0
    map_top_k: Optional[int] = None
    pr_interpolated: bool = False

    def as_dict(self) -> Dict:
        return {
            'code_length': self.code_length,
            'num_queries': self.num_queries,
            'database_size': self.database_size,
            'map': self.map,
            'map_top_k': self.map_top_k,
            'p_at_radius': self.p_at_radius,
            'radius': self.radius,
            'skipped_queries': self.skipped_queries,
            'pr_interpolated': self.pr_interpolated,
            'pr_curve': [{'recall': r, 'precision': p} for r, p in self.pr_curve],
            'topn_curve': [{'n': n, 'precision': p} for n, p in self.topn_curve],
            'radius_curve': [
                {'radius': radius, 'precision': p, 'recall': r} for radius, p, r in self.radius_curve
            ],
        }
