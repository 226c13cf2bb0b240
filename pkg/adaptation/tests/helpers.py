"""
Shared fixtures for the numerical suites: a central finite-difference
gradient oracle and tiny corpora, embedding tables and models.
"""
import numpy as np

from adaptation.data.corpus import Corpus, Example
from adaptation.data.synthetic import SyntheticSpec, gen_synthetic
from adaptation.engine.layers import EmbeddingTable
from adaptation.engine.losses import SOURCE
from adaptation.engine.model import STANCE_CLASSES, DanModel, ModelConfig
from adaptation.engine.tensor import Tape

WORDS = ('good', 'bad', 'fact', 'opinion', 'the', 'is', 'great', 'awful', 'report', 'says')


def numerical_gradient(loss_value, tensor, eps=1e-6):
    """Central differences of the scalar ``loss_value()`` with respect to ``tensor.data``."""
    grad = np.zeros_like(tensor.data)
    for idx in np.ndindex(*tensor.shape):
        original = tensor.data[idx]
        tensor.data[idx] = original + eps
        plus = loss_value()
        tensor.data[idx] = original - eps
        minus = loss_value()
        tensor.data[idx] = original
        grad[idx] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(a, b):
    scale = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


class GradientCheckMixin:
    """assertGradientsMatch compares tape gradients against finite differences."""

    def assertGradientsMatch(self, build_loss, tensors, tolerance=1e-4):
        with Tape() as tape:
            tape.watch(*tensors)
            tape.backward(build_loss())
        analytic = [t.grad.copy() for t in tensors]
        for tensor, grad in zip(tensors, analytic):
            numeric = numerical_gradient(lambda: build_loss().item(), tensor)
            error = relative_error(grad, numeric)
            self.assertLessEqual(error, tolerance, f"{tensor.name or tensor.shape}: relative error {error:.2e}")


def tiny_table(d_e=4, seed=0, trainable=False):
    rng = np.random.default_rng(seed)
    return EmbeddingTable.from_vectors(list(WORDS), rng.normal(0.0, 0.5, size=(len(WORDS), d_e)), trainable=trainable)


def tiny_model(view_mode='dual', aligner='h-adversarial', d_e=4, d_h=3, d_f=3, seed=7, dropout=0.0,
               table=None, pooling='mean'):
    table = table if table is not None else tiny_table(d_e)
    config = ModelConfig(d_e=table.d_e, d_h=d_h, d_f=d_f, view_mode=view_mode, aligner_kind=aligner,
                         pooling=pooling, dropout=dropout, seed=seed)
    return DanModel(config, table)


def make_corpus(domain=SOURCE, n=9, seed=0, labeled=True, silver=True, prefix=None):
    """Random utterances over ``WORDS``; stances cycle through the three classes."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n):
        length = int(rng.integers(2, 6))
        tokens = tuple(WORDS[j] for j in rng.integers(len(WORDS), size=length))
        examples.append(Example(
            id=f'{prefix or domain[0]}{i}',
            topic='topic',
            text=' '.join(tokens),
            tokens=tokens,
            domain=domain,
            stance=STANCE_CLASSES[i % 3] if labeled else None,
            silver_subj=int(rng.integers(2)) if silver else None,
            silver_obj=int(rng.integers(2)) if silver else None,
        ))
    return Corpus(examples, domain=domain)


def small_synthetic(seed=13, n=60, shift=0.6):
    return gen_synthetic(SyntheticSpec(
        n_source=n, n_target=n, shift=shift, seed=seed, d_e=8, n_filler=20, cues_per_stance=2,
        min_length=4, max_length=8, max_cues=2,
    ))


def synthetic_model(data, view_mode='dual', aligner='h-adversarial', d_h=6, d_f=6, seed=7, dropout=0.0):
    table = EmbeddingTable.from_vectors(data.words, data.vectors)
    config = ModelConfig(d_e=table.d_e, d_h=d_h, d_f=d_f, view_mode=view_mode, aligner_kind=aligner,
                         dropout=dropout, seed=seed)
    return DanModel(config, table)
