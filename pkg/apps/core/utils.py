"""
Core Utility Functions
"""
import hashlib
import json
import logging
import random
from pathlib import Path
from typing import Dict, Iterable

import numpy as np
import torch
from django.conf import settings

logger = logging.getLogger(__name__)


def seed_everything(seed: int) -> torch.Generator:
    """
    Seed python, numpy and torch; return a dedicated torch generator.

    The returned generator drives data order and triplet sampling so those
    streams stay reproducible independently of parameter initialisation.
    """
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    if settings.FINEHASH_NUM_THREADS:
        torch.set_num_threads(settings.FINEHASH_NUM_THREADS)

    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator


def file_digest(path) -> str:
    """
    SHA-256 of a file's bytes, used to compare artifacts across runs.
    """
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def append_json_line(path, record: Dict) -> None:
    """
    Append one JSON object as a line to `path`, creating parents.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'a', encoding='utf-8') as handle:
        handle.write(json.dumps(record, sort_keys=True) + '\n')


def read_json_lines(path) -> Iterable[Dict]:
    """
    Read back a file written with `append_json_line`.
    """
    with open(path, encoding='utf-8') as handle:
        return [json.loads(line) for line in handle if line.strip()]


def ensure_parent(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
