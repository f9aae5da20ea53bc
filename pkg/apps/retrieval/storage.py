"""
Code Database Files

Binary layout, all little-endian::

    offset  size  field
    0       4     magic  b'FHCD'
    4       2     version (1)
    6       4     code length b in bits
    10      8     code count n
    18      8*n*ceil(b/64)  packed words, code after code

Labels live next to the codes in `<file>.labels`, one integer per line in
code order.
"""
import csv
import json
import logging
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from apps.core.exceptions import CodeFormatError
from apps.core.utils import ensure_parent
from .structures import CodeDatabase, RetrievalMetrics, words_for

logger = logging.getLogger(__name__)

MAGIC = b'FHCD'
VERSION = 1
HEADER = struct.Struct('<4sHIQ')

METRICS_CSV_HEADER = ('metric', 'x', 'value')


def labels_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + '.labels')


def write_code_database(path, db: CodeDatabase) -> Tuple[Path, Path]:
    path = ensure_parent(path)
    with open(path, 'wb') as handle:
        handle.write(HEADER.pack(MAGIC, VERSION, db.code_length, len(db)))
        handle.write(db.words.astype('<u8').tobytes())

    sidecar = labels_path(path)
    sidecar.write_text(''.join(f"{int(label)}\n" for label in db.labels), encoding='utf-8')
    logger.info(f"Wrote {len(db)} {db.code_length}-bit codes to {path}")
    return path, sidecar


def read_code_database(path) -> CodeDatabase:
    path = Path(path)
    if not path.is_file():
        raise CodeFormatError(f"Code database not found: {path}", path=str(path))

    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise CodeFormatError(f"{path} is too short for a code database header", path=str(path))
    magic, version, code_length, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CodeFormatError(f"{path} is not a code database (magic {magic!r})", path=str(path))
    if version != VERSION:
        raise CodeFormatError(f"Unsupported code database version {version}", path=str(path), version=version)
    if code_length < 1:
        raise CodeFormatError(f"Invalid code length {code_length}", path=str(path))

    words_per_code = words_for(code_length)
    expected = HEADER.size + 8 * words_per_code * count
    if len(data) != expected:
        raise CodeFormatError(
            f"{path} holds {len(data)} bytes, header implies {expected}",
            path=str(path), expected=expected, actual=len(data),
        )
    if count:
        words = np.frombuffer(data, dtype='<u8', offset=HEADER.size).reshape(count, words_per_code)
    else:
        words = np.zeros((0, words_per_code), dtype='<u8')

    sidecar = labels_path(path)
    if not sidecar.is_file():
        raise CodeFormatError(f"Label file missing: {sidecar}", path=str(sidecar))
    try:
        labels = [int(line) for line in sidecar.read_text(encoding='utf-8').split()]
    except ValueError as exc:
        raise CodeFormatError(f"Unreadable label file {sidecar}: {exc}", path=str(sidecar))
    if len(labels) != count:
        raise CodeFormatError(
            f"{sidecar} has {len(labels)} labels for {count} codes", path=str(sidecar),
        )

    return CodeDatabase(words.astype(np.uint64), np.asarray(labels, dtype=np.int64), code_length)


def write_metrics_json(metrics: RetrievalMetrics, path) -> Path:
    path = ensure_parent(path)
    path.write_text(json.dumps(metrics.as_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def write_metrics_csv(metrics: RetrievalMetrics, path) -> Path:
    """
    Long-format rows for plotting: one (metric, x, value) row per point.
    """
    path = ensure_parent(path)
    rows = [('map', '', metrics.map), ('p_at_radius', metrics.radius, metrics.p_at_radius)]
    rows += [('pr_curve', recall, precision) for recall, precision in metrics.pr_curve]
    rows += [('topn_precision', n, precision) for n, precision in metrics.topn_curve]
    rows += [('radius_precision', radius, precision) for radius, precision, _ in metrics.radius_curve]
    rows += [('radius_recall', radius, recall) for radius, _, recall in metrics.radius_curve]

    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(METRICS_CSV_HEADER)
        writer.writerows(rows)
    return path
