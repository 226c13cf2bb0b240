"""
Vocabulary assembly and the GloVe-style text embedding file
(``word v1 v2 ... v_d`` per line).
"""
import logging
from collections import Counter
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from adaptation.data.corpus import Corpus
from adaptation.engine.layers import EmbeddingTable
from adaptation.exceptions import DataError

logger = logging.getLogger(__name__)


def build_vocabulary(corpora: Iterable[Corpus], min_freq: int = 1) -> List[str]:
    """Tokens of all corpora with frequency >= ``min_freq``, most frequent first."""
    counts = Counter(tok for corpus in corpora for ex in corpus for tok in ex.tokens)
    kept = [tok for tok, n in counts.items() if n >= min_freq]
    return sorted(kept, key=lambda tok: (-counts[tok], tok))


def read_embedding_file(path: Union[str, Path], expected_dim: Optional[int] = None,
                        restrict_to: Optional[Iterable[str]] = None) -> Tuple[List[str], np.ndarray]:
    """
    Read word vectors. Every line must have the same width; a mismatch is
    reported with its line number. A leading ``count dim`` header line is skipped.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Embedding file not found: {path}")
    wanted = set(restrict_to) if restrict_to is not None else None
    dim = expected_dim
    words: List[str] = []
    rows: List[np.ndarray] = []
    seen = set()
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip().split(' ')
            if not parts or not parts[0]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise DataError(f"{path}:{lineno}: vector width {len(values)} differs from {dim}")
            if word in seen or (wanted is not None and word not in wanted):
                continue
            try:
                rows.append(np.array(values, dtype=np.float64))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector component") from None
            words.append(word)
            seen.add(word)
    vectors = np.stack(rows) if rows else np.zeros((0, dim or 0))
    return words, vectors


def write_embedding_file(path: Union[str, Path], words: Sequence[str], vectors: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        for word, vec in zip(words, vectors):
            fh.write(word + ' ' + ' '.join(repr(float(v)) for v in vec) + '\n')
    return path


def build_embedding_table(vocabulary: Sequence[str], words: Sequence[str], vectors: np.ndarray,
                          trainable: bool = False) -> EmbeddingTable:
    """Table over the vocabulary tokens that have a vector; the rest fall back to UNK."""
    lookup = {w: i for i, w in enumerate(words)}
    covered = [tok for tok in vocabulary if tok in lookup]
    if vocabulary and not covered:
        raise DataError("No vocabulary token has an embedding vector")
    if covered:
        matrix = vectors[[lookup[tok] for tok in covered]]
    else:
        matrix = np.zeros((0, vectors.shape[1] if vectors.ndim == 2 else 0))
    missing = len(vocabulary) - len(covered)
    logger.info("Embedding coverage %d/%d tokens (%d mapped to UNK)", len(covered), len(vocabulary), missing)
    return EmbeddingTable.from_vectors(covered, matrix, trainable=trainable)


def load_embeddings(path: Union[str, Path], corpora: Sequence[Corpus], expected_dim: Optional[int] = None,
                    trainable: bool = False, min_freq: int = 1) -> EmbeddingTable:
    vocabulary = build_vocabulary(corpora, min_freq=min_freq)
    words, vectors = read_embedding_file(path, expected_dim=expected_dim, restrict_to=vocabulary)
    return build_embedding_table(vocabulary, words, vectors, trainable=trainable)
