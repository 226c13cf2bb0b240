import logging
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from adaptation.data.corpus import Corpus, Example
from adaptation.exceptions import DataError

logger = logging.getLogger(__name__)

DOMAIN_STREAMS = {'source': 0, 'target': 1}

_warned = set()


@lru_cache(maxsize=64)
def _epoch_order(n: int, seed: int, stream: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, stream, epoch]).permutation(n)


def batch_indices(n: int, m: int, seed: int, iteration: int, stream: int = 0) -> np.ndarray:
    """
    Indices of batch ``iteration`` (0-based) in a stream that reshuffles every epoch.
    When ``m`` exceeds ``n`` each batch is drawn with replacement instead.
    """
    if n < 1:
        raise DataError("Cannot sample from an empty corpus")
    if m < 1:
        raise DataError(f"Batch size must be at least 1, got {m}")
    if m > n:
        key = (n, m, stream)
        if key not in _warned:
            _warned.add(key)
            logger.warning("Batch size %d exceeds corpus size %d; sampling with replacement", m, n)
        return np.random.default_rng([seed, stream, iteration]).integers(0, n, size=m)
    positions = np.arange(iteration * m, (iteration + 1) * m)
    out = np.empty(m, dtype=np.int64)
    for epoch in np.unique(positions // n):
        sel = positions // n == epoch
        out[sel] = _epoch_order(n, seed, stream, int(epoch))[positions[sel] % n]
    return out


def sample_batches(source: Corpus, target: Corpus, m: int, seed: int,
                   iteration: int) -> Tuple[List[Example], List[Example]]:
    """m source and m target examples for training iteration ``iteration``."""
    src = batch_indices(len(source), m, seed, iteration, DOMAIN_STREAMS['source'])
    tgt = batch_indices(len(target), m, seed, iteration, DOMAIN_STREAMS['target'])
    return [source[i] for i in src], [target[i] for i in tgt]
