"""
Retrieval Services

Hamming ranking over packed codes and the usual hashing metrics: MAP,
precision-recall at fixed recall levels, precision within a Hamming radius
and precision over the top N results.
"""
import logging
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from apps.core.exceptions import ConfigurationError, DimensionMismatchError, EmptyQuerySetError
from .structures import WORD_BITS, CodeDatabase, RankedResult, RetrievalMetrics, words_for

logger = logging.getLogger(__name__)

QUERY_CHUNK = 256


def pack_codes(codes) -> np.ndarray:
    """
    (n, b) array of +-1 entries -> (n, ceil(b / 64)) little-endian uint64 words.
    """
    codes = np.asarray(codes)
    if codes.ndim == 1:
        codes = codes[None, :]
    count, code_length = codes.shape
    bits = np.zeros((count, words_for(code_length) * WORD_BITS), dtype=np.uint8)
    bits[:, :code_length] = codes > 0
    packed = np.packbits(bits, axis=1, bitorder='little')
    return packed.view('<u8').astype(np.uint64)


def unpack_codes(words: np.ndarray, code_length: int) -> np.ndarray:
    """Inverse of `pack_codes`, returning int8 +-1 codes."""
    words = np.atleast_2d(np.asarray(words, dtype=np.uint64))
    bits = np.unpackbits(words.astype('<u8').view(np.uint8), axis=1, bitorder='little')
    return np.where(bits[:, :code_length] == 1, 1, -1).astype(np.int8)


def build_database(codes, labels: Sequence[int]) -> CodeDatabase:
    codes = np.atleast_2d(np.asarray(codes))
    return CodeDatabase(pack_codes(codes), np.asarray(labels, dtype=np.int64), codes.shape[1])


def hamming_distance(a, b) -> int:
    """
    Number of positions where two +-1 codes differ.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Codes of length {a.shape} and {b.shape} cannot be compared")
    return int(np.bitwise_count(np.bitwise_xor(pack_codes(a), pack_codes(b))).sum())


def hamming_distances(query_words: np.ndarray, db_words: np.ndarray) -> np.ndarray:
    """
    (q, w) and (n, w) packed words -> (q, n) Hamming distances.
    """
    query_words = np.atleast_2d(query_words)
    if query_words.shape[1] != db_words.shape[1]:
        raise DimensionMismatchError("Query and database codes have different word counts")
    xor = np.bitwise_xor(query_words[:, None, :], db_words[None, :, :])
    return np.bitwise_count(xor).sum(axis=-1, dtype=np.int64)


def check_compatible(queries: CodeDatabase, db: CodeDatabase):
    if queries.code_length != db.code_length:
        raise DimensionMismatchError(
            f"Query codes have {queries.code_length} bits, database codes {db.code_length}",
        )
    if len(queries) == 0:
        raise EmptyQuerySetError("No queries to evaluate")


def rank(distances: np.ndarray) -> np.ndarray:
    """Ascending distance, ascending database position on ties."""
    return np.argsort(distances, axis=-1, kind='stable')


def iter_rankings(queries: CodeDatabase, db: CodeDatabase) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
    """
    Yield (query position, ranked distances, ranked relevance) per query.
    """
    for start in range(0, len(queries), QUERY_CHUNK):
        block = hamming_distances(queries.words[start:start + QUERY_CHUNK], db.words)
        order = rank(block)
        for offset, (distances, positions) in enumerate(zip(block, order)):
            q = start + offset
            yield q, distances[positions], db.labels[positions] == queries.labels[q]


def query(db: CodeDatabase, code, k: int, query_label: Optional[int] = None) -> RankedResult:
    """
    The k nearest database codes to a +-1 `code`; k larger than the database returns everything.
    """
    if k < 0:
        raise ConfigurationError(f"k must be non-negative, got {k}")
    code = np.asarray(code).ravel()
    if code.shape[0] != db.code_length:
        raise DimensionMismatchError(
            f"Query code has {code.shape[0]} bits, database codes {db.code_length}",
        )
    distances = hamming_distances(pack_codes(code), db.words)[0]
    order = rank(distances)[:k]
    return RankedResult(
        indices=order,
        distances=distances[order],
        labels=db.labels[order],
        query_label=query_label,
    )


def average_precision(relevant: np.ndarray, top_k: Optional[int] = None) -> Optional[float]:
    """
    (1 / n+) * sum_k P@k * rel_k over a ranked relevance vector.

    With `top_k`, only the first top_k ranks count and n+ is the number of
    relevant items among them. Returns None when n+ is zero.
    """
    relevant = np.asarray(relevant, dtype=bool)
    if top_k is not None:
        relevant = relevant[:top_k]
    hits = np.cumsum(relevant)
    total = int(hits[-1]) if hits.size else 0
    if total == 0:
        return None
    ranks = np.arange(1, relevant.size + 1)
    return float(np.sum((hits / ranks)[relevant]) / total)


def average_precisions(queries: CodeDatabase, db: CodeDatabase, top_k: Optional[int] = None) -> List[Optional[float]]:
    check_compatible(queries, db)
    values: List[Optional[float]] = [None] * len(queries)
    for q, _, relevant in iter_rankings(queries, db):
        values[q] = average_precision(relevant, top_k)
    return values


def map_score(queries: CodeDatabase, db: CodeDatabase, top_k: Optional[int] = None) -> float:
    """
    Mean average precision over the full ranking, or the first `top_k` ranks.

    Queries without any relevant database item are skipped and logged.
    """
    values = average_precisions(queries, db, top_k)
    scored = [value for value in values if value is not None]
    skipped = len(values) - len(scored)
    if skipped:
        logger.warning(f"{skipped} of {len(values)} queries have no relevant item and were skipped")
    if not scored:
        raise EmptyQuerySetError("No query has a relevant database item", skipped=skipped)
    return float(np.mean(scored))


def precision_recall_curve(queries: CodeDatabase, db: CodeDatabase, points: Optional[int] = None,
                           interpolate: bool = False) -> List[Tuple[float, float]]:
    """
    Precision against recall at `points` evenly spaced recall levels in [0, 1].

    Per query, precision and recall are taken at every rank cutoff. At
    recall level r a query contributes the precision of the first cutoff
    whose recall reaches r, so level 0 is the precision of the top item and
    irrelevant items ranked ahead of a relevant one lower its point. With
    `interpolate`, the best precision at any recall >= r is used instead.
    Query curves are averaged level by level.
    """
    points = points or settings.FINEHASH_PR_POINTS
    if points < 2:
        raise ConfigurationError(f"A precision-recall curve needs at least 2 points, got {points}")
    check_compatible(queries, db)

    levels = np.linspace(0.0, 1.0, points)
    curves = []
    for _, _, relevant in iter_rankings(queries, db):
        total = int(relevant.sum())
        if total == 0:
            continue
        hits = np.cumsum(relevant)
        precision = hits / np.arange(1, relevant.size + 1)
        recall = hits / total
        if interpolate:
            precision = np.maximum.accumulate(precision[::-1])[::-1]
        # recall ends at 1, so every level is reached by some cutoff
        reached = np.searchsorted(recall, levels - 1e-12, side='left')
        curves.append(precision[reached])

    if not curves:
        raise EmptyQuerySetError("No query has a relevant database item")
    mean = np.mean(curves, axis=0)
    return [(float(r), float(p)) for r, p in zip(levels, mean)]


def precision_at_radius(queries: CodeDatabase, db: CodeDatabase, radius: Optional[int] = None,
                        empty_as_zero: bool = True) -> float:
    """
    Mean precision among database items within Hamming distance `radius`.

    A query whose ball is empty scores 0, or is left out when
    `empty_as_zero` is False.
    """
    radius = settings.FINEHASH_HAMMING_RADIUS if radius is None else radius
    check_compatible(queries, db)

    values = []
    for _, distances, relevant in iter_rankings(queries, db):
        inside = distances <= radius
        retrieved = int(inside.sum())
        if retrieved == 0:
            if empty_as_zero:
                values.append(0.0)
            continue
        values.append(float(relevant[inside].sum()) / retrieved)
    return float(np.mean(values)) if values else 0.0


def precision_recall_by_radius(queries: CodeDatabase, db: CodeDatabase) -> List[Tuple[int, float, float]]:
    """
    (radius, precision, recall) for every radius 0..b.

    Precision uses the empty-ball-is-zero rule; recall averages over queries
    that have at least one relevant item.
    """
    check_compatible(queries, db)
    radii = np.arange(db.code_length + 1)
    precision = np.zeros(radii.size)
    recall = np.zeros(radii.size)
    with_relevant = 0
    for _, distances, relevant in iter_rankings(queries, db):
        retrieved = np.searchsorted(distances, radii, side='right')
        hits = np.concatenate([[0], np.cumsum(relevant)])[retrieved]
        precision += np.divide(hits, retrieved, out=np.zeros(radii.size), where=retrieved > 0)
        total = int(relevant.sum())
        if total:
            recall += hits / total
            with_relevant += 1
    precision /= len(queries)
    if with_relevant:
        recall /= with_relevant
    return [(int(r), float(p), float(c)) for r, p, c in zip(radii, precision, recall)]


def precision_at_topn(queries: CodeDatabase, db: CodeDatabase, n_values: Sequence[int]) -> List[Tuple[int, float]]:
    """
    Mean precision among the first N ranked items, for each N.
    """
    check_compatible(queries, db)
    n_values = [int(n) for n in n_values]
    if any(n < 1 or n > len(db) for n in n_values):
        raise ConfigurationError(
            f"Top-N values must lie in [1, {len(db)}], got {n_values}", n_values=n_values,
        )
    sums = np.zeros(len(n_values))
    for _, _, relevant in iter_rankings(queries, db):
        hits = np.cumsum(relevant)
        sums += [hits[n - 1] / n for n in n_values]
    return [(n, float(total / len(queries))) for n, total in zip(n_values, sums)]


def random_code_baseline(queries: CodeDatabase, db: CodeDatabase, seed: int = 0,
                         top_k: Optional[int] = None) -> float:
    """
    MAP obtained when every image gets a uniformly random code of the same length.
    """
    rng = np.random.default_rng(seed)
    b = db.code_length
    random_db = build_database(rng.choice([-1, 1], size=(len(db), b)), db.labels)
    random_queries = build_database(rng.choice([-1, 1], size=(len(queries), b)), queries.labels)
    return map_score(random_queries, random_db, top_k)


def evaluate(queries: CodeDatabase, db: CodeDatabase, radius: Optional[int] = None,
             topn: Optional[Sequence[int]] = None, pr_points: Optional[int] = None,
             top_k: Optional[int] = None, interpolate_pr: bool = False) -> RetrievalMetrics:
    """
    Every metric for one query set against one database.

    Top-N values larger than the database are dropped.
    """
    radius = settings.FINEHASH_HAMMING_RADIUS if radius is None else radius
    topn = [n for n in (topn or settings.FINEHASH_TOPN_VALUES) if n <= len(db)]

    values = average_precisions(queries, db, top_k)
    scored = [value for value in values if value is not None]
    if not scored:
        raise EmptyQuerySetError("No query has a relevant database item")

    metrics = RetrievalMetrics(
        code_length=db.code_length,
        num_queries=len(queries),
        database_size=len(db),
        map=float(np.mean(scored)),
        map_top_k=top_k,
        p_at_radius=precision_at_radius(queries, db, radius),
        radius=radius,
        pr_curve=precision_recall_curve(queries, db, pr_points, interpolate=interpolate_pr),
        pr_interpolated=interpolate_pr,
        topn_curve=precision_at_topn(queries, db, topn) if topn else [],
        radius_curve=precision_recall_by_radius(queries, db),
        skipped_queries=len(values) - len(scored),
    )
    logger.info(
        f"Evaluated {metrics.num_queries} queries against {metrics.database_size} codes: "
        f"MAP={metrics.map:.4f} P@r{radius}={metrics.p_at_radius:.4f}"
    )
    return metrics
