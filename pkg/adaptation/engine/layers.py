"""
Parameterized layers: fixed word embeddings, the BiLSTM view encoder, two-layer
feed-forward heads and dropout.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from adaptation.engine.tensor import (
    Tensor, concat, gather, matmul, parameter, relu, reshape, sigmoid, softmax,
    take, tanh, transpose,
)
from adaptation.exceptions import DataError, ShapeError

INIT_SCALE = 0.08
UNK_TOKEN = '<unk>'
UNK_ID = 0

POOLING_MODES = ('mean', 'last')
FFN_OUTPUTS = ('probabilities', 'logits', 'scalar')


def uniform_init(rng: np.random.Generator, *shape: int, scale: float = INIT_SCALE) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


# =============================================================================
# EMBEDDINGS
# =============================================================================

class EmbeddingTable:
    """
    Word vectors stored column-wise, ``W`` has shape (d_e, V).
    Column ``UNK_ID`` is reserved for out-of-vocabulary tokens and starts at zero.
    """

    def __init__(self, matrix: np.ndarray, vocabulary: Dict[str, int], trainable: bool = False):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2:
            raise ShapeError(f"Embedding matrix must be 2-D (d_e x V), got shape {matrix.shape}")
        d_e, size = matrix.shape
        bad = [tok for tok, idx in vocabulary.items() if not 0 <= idx < size]
        if bad:
            raise DataError(f"Vocabulary indices out of range for V={size}: {bad[:5]}")
        if vocabulary.get(UNK_TOKEN, UNK_ID) != UNK_ID:
            raise DataError(f"'{UNK_TOKEN}' must map to the reserved id {UNK_ID}")
        self.vocabulary = dict(vocabulary)
        self.vocabulary[UNK_TOKEN] = UNK_ID
        self.trainable = trainable
        self.W = Tensor(matrix, requires_grad=trainable, name='embedding.W')

    @classmethod
    def from_vectors(cls, words: Sequence[str], vectors: np.ndarray, trainable: bool = False) -> 'EmbeddingTable':
        """Build a table whose column 0 is a zero UNK vector followed by ``vectors`` rows."""
        vectors = np.asarray(vectors)
        d_e = vectors.shape[1] if vectors.ndim == 2 else 0
        matrix = np.zeros((d_e, len(words) + 1))
        if len(words):
            matrix[:, 1:] = vectors.T
        vocabulary = {UNK_TOKEN: UNK_ID}
        for offset, word in enumerate(words, start=1):
            vocabulary[word] = offset
        return cls(matrix, vocabulary, trainable=trainable)

    @property
    def d_e(self) -> int:
        return self.W.shape[0]

    @property
    def V(self) -> int:
        return self.W.shape[1]

    def ids_for(self, tokens: Sequence[str]) -> List[int]:
        return [self.vocabulary.get(tok, UNK_ID) for tok in tokens]

    def validate_ids(self, ids: Sequence[int]) -> None:
        for idx in ids:
            if not 0 <= idx < self.V:
                raise DataError(f"Token id {idx} outside vocabulary of size {self.V}")

    def rows(self, ids: Sequence[int]):
        """Vectors for ``ids`` as a (len, d_e) array, or a tracked tensor when trainable."""
        self.validate_ids(ids)
        if self.trainable:
            return gather(transpose(self.W), ids)
        return self.W.data[:, list(ids)].T


def embed(tokens: Sequence[int], table: EmbeddingTable) -> Tensor:
    """Look up the column W[x_j] for every token id."""
    if not len(tokens):
        return Tensor(np.zeros((0, table.d_e)))
    rows = table.rows(tokens)
    return rows if isinstance(rows, Tensor) else Tensor(rows)


# =============================================================================
# DROPOUT
# =============================================================================

@dataclass
class DropoutSpec:
    rate: float = 0.1
    active: bool = True

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"Dropout rate must lie in [0, 1), got {self.rate}")

    def apply(self, features: Tensor, rng: Optional[np.random.Generator]) -> Tensor:
        if not self.active or self.rate == 0.0 or rng is None:
            return features
        keep = (rng.random(features.shape) >= self.rate) / (1.0 - self.rate)
        return features * Tensor(keep)


# =============================================================================
# BiLSTM ENCODER
# =============================================================================

class LSTMCell:
    """One LSTM direction. Gate blocks in W_x, W_h and b are ordered input, forget, output, candidate."""

    def __init__(self, d_in: int, d_h: int, rng: np.random.Generator, name: str):
        self.d_h = d_h
        self.W_x = parameter(uniform_init(rng, d_in, 4 * d_h), name=f'{name}.W_x')
        self.W_h = parameter(uniform_init(rng, d_h, 4 * d_h), name=f'{name}.W_h')
        self.b = parameter(np.zeros(4 * d_h), name=f'{name}.b')

    def parameters(self) -> Dict[str, Tensor]:
        return {t.name: t for t in (self.W_x, self.W_h, self.b)}

    def step(self, x, h, c):
        d = self.d_h
        z = matmul(x, self.W_x) + matmul(h, self.W_h) + self.b
        i = sigmoid(take(z, 0, d, axis=1))
        f = sigmoid(take(z, d, 2 * d, axis=1))
        o = sigmoid(take(z, 2 * d, 3 * d, axis=1))
        g = tanh(take(z, 3 * d, 4 * d, axis=1))
        c = f * c + i * g
        return o * tanh(c), c


class BiLSTMEncoder:
    """
    View function F: embeddings -> BiLSTM -> per-step projection W_l h_j + b_l -> pooling.

    Padded positions carry the previous state forward, so every sequence in a
    batch is encoded exactly as it would be on its own.
    """

    def __init__(self, d_e: int, d_h: int, rng: np.random.Generator, name: str, pooling: str = 'mean'):
        if pooling not in POOLING_MODES:
            raise ValueError(f"Unknown pooling '{pooling}'")
        self.name = name
        self.d_e = d_e
        self.d_h = d_h
        self.pooling = pooling
        self.forward_cell = LSTMCell(d_e, d_h, rng, f'{name}.fwd')
        self.backward_cell = LSTMCell(d_e, d_h, rng, f'{name}.bwd')
        self.W_l = parameter(uniform_init(rng, d_h, 2 * d_h), name=f'{name}.W_l')
        self.b_l = parameter(np.zeros(d_h), name=f'{name}.b_l')

    def parameters(self) -> Dict[str, Tensor]:
        params = {}
        params.update(self.forward_cell.parameters())
        params.update(self.backward_cell.parameters())
        params[self.W_l.name] = self.W_l
        params[self.b_l.name] = self.b_l
        return params

    def _run(self, cell: LSTMCell, inputs, mask: np.ndarray, order) -> List[Tensor]:
        batch = mask.shape[0]
        h = Tensor(np.zeros((batch, self.d_h)))
        c = Tensor(np.zeros((batch, self.d_h)))
        states: List[Optional[Tensor]] = [None] * mask.shape[1]
        for t in order:
            h_new, c_new = cell.step(inputs[t], h, c)
            keep = mask[:, t:t + 1]
            if keep.all():
                h, c = h_new, c_new
            else:
                carry = Tensor(1.0 - keep)
                h = h_new * Tensor(keep) + h * carry
                c = c_new * Tensor(keep) + c * carry
            states[t] = h
        return states

    def encode_batch(self, sequences: Sequence[Sequence[int]], table: EmbeddingTable,
                     dropout: Optional[DropoutSpec] = None,
                     rng: Optional[np.random.Generator] = None) -> Tensor:
        """Encode a batch of token id sequences into a (B, d_h) feature tensor."""
        if table.d_e != self.d_e:
            raise ShapeError(f"Encoder expects d_e={self.d_e}, embedding table has {table.d_e}")
        lengths = np.array([len(seq) for seq in sequences])
        if not len(sequences):
            raise DataError("Cannot encode an empty batch")
        if (lengths == 0).any():
            empty = int(np.flatnonzero(lengths == 0)[0])
            raise DataError(f"Cannot encode an empty token sequence (batch position {empty})")

        steps = int(lengths.max())
        ids = np.full((len(sequences), steps), UNK_ID, dtype=np.int64)
        for row, seq in enumerate(sequences):
            table.validate_ids(seq)
            ids[row, :len(seq)] = seq
        mask = (np.arange(steps)[None, :] < lengths[:, None]).astype(table.W.data.dtype)

        if table.trainable:
            vectors = transpose(table.W)
            inputs = [gather(vectors, ids[:, t]) for t in range(steps)]
        else:
            dense = table.W.data.T[ids]
            inputs = [Tensor(dense[:, t, :]) for t in range(steps)]

        fwd = self._run(self.forward_cell, inputs, mask, range(steps))
        bwd = self._run(self.backward_cell, inputs, mask, range(steps - 1, -1, -1))

        if self.pooling == 'mean':
            weights = mask / lengths[:, None]
        else:
            weights = (np.arange(steps)[None, :] == (lengths - 1)[:, None]).astype(mask.dtype)
        pooled_f = self._pool(fwd, weights)
        pooled_b = self._pool(bwd, weights)
        # Projection is affine, so pooling before projecting equals projecting every step.
        states = concat([pooled_f, pooled_b], axis=1)
        features = matmul(states, transpose(self.W_l)) + self.b_l
        if dropout is not None:
            features = dropout.apply(features, rng)
        return features

    @staticmethod
    def _pool(states: List[Tensor], weights: np.ndarray) -> Tensor:
        total = None
        for t, state in enumerate(states):
            w = weights[:, t:t + 1]
            if not w.any():
                continue
            term = state if np.all(w == 1.0) else state * Tensor(w)
            total = term if total is None else total + term
        return total


def encode(tokens: Sequence[int], table: EmbeddingTable, lstm: BiLSTMEncoder,
           dropout: Optional[DropoutSpec] = None, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Encode one utterance into its (d_h,) view feature."""
    if not len(tokens):
        raise DataError("Cannot encode an empty token sequence")
    return reshape(lstm.encode_batch([tokens], table, dropout, rng), (lstm.d_h,))


# =============================================================================
# FEED-FORWARD HEADS
# =============================================================================

class FeedForward:
    """Two-layer head: input -> d_f (ReLU) -> output width."""

    def __init__(self, d_in: int, d_f: int, d_out: int, rng: np.random.Generator, name: str):
        self.name = name
        self.d_in = d_in
        self.d_f = d_f
        self.d_out = d_out
        self.W1 = parameter(uniform_init(rng, d_in, d_f), name=f'{name}.W1')
        self.b1 = parameter(np.zeros(d_f), name=f'{name}.b1')
        self.W2 = parameter(uniform_init(rng, d_f, d_out), name=f'{name}.W2')
        self.b2 = parameter(np.zeros(d_out), name=f'{name}.b2')

    def parameters(self) -> Dict[str, Tensor]:
        return {t.name: t for t in (self.W1, self.b1, self.W2, self.b2)}

    def __call__(self, features: Tensor, output: str = 'probabilities') -> Tensor:
        return ffn_forward(features, self, output)


def ffn_forward(features: Tensor, params: FeedForward, output: str = 'probabilities') -> Tensor:
    if output not in FFN_OUTPUTS:
        raise ValueError(f"Unknown output mode '{output}'")
    if features.shape[-1] != params.d_in:
        raise ShapeError(
            f"{params.name}: input width {features.shape[-1]} does not match expected {params.d_in}")
    hidden = relu(matmul(features, params.W1) + params.b1)
    logits = matmul(hidden, params.W2) + params.b2
    if output == 'logits':
        return logits
    if output == 'probabilities':
        return softmax(logits, axis=-1)
    if params.d_out != 1:
        raise ShapeError(f"{params.name}: scalar output needs width 1, head has {params.d_out}")
    return reshape(logits, features.shape[:-1])
