"""
Scalar objectives: classification NLL, the two domain-confusion losses, the
CORAL covariance penalty and the composite min/max objectives.

Every loss sums over the batch; per-example means are only used for logging.
"""
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Union

import numpy as np

from adaptation.engine.tensor import (
    Tensor, as_tensor, clamp, ln, matmul, reduce_mean, reduce_sum, take, transpose,
)
from adaptation.engine.variants import AlignerKind
from adaptation.exceptions import ConfigurationError, DataError, ShapeError

PROB_FLOOR = 1e-12

Scalar = Union[Tensor, float]

SOURCE = 'source'
TARGET = 'target'


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.1
    beta: float = 0.1
    gamma: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigurationError(f"Loss weight {f.name} must be non-negative")


@dataclass
class LossComponents:
    """
    Per-batch loss terms. ``conf_subj``/``conf_obj`` hold the alignment penalty
    of each view: the confusion loss for adversarial aligners, the CORAL
    distance under ``coral``. Absent terms are ``None``.
    """
    stance: Scalar = 0.0
    subj: Optional[Scalar] = None
    obj: Optional[Scalar] = None
    conf_subj: Optional[Scalar] = None
    conf_obj: Optional[Scalar] = None

    def as_floats(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Tensor):
                value = value.item()
            out[f.name] = None if value is None else float(value)
        return out


def _prob_floor(x: Tensor) -> Tensor:
    return ln(clamp(x, PROB_FLOOR))


def _one_hot(targets, num_classes: int) -> np.ndarray:
    targets = np.asarray(targets)
    if targets.ndim == 1:
        if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
            raise ShapeError(f"Class index outside [0, {num_classes})")
        return np.eye(num_classes)[targets.astype(np.int64)]
    return targets


def _source_mask(domains) -> np.ndarray:
    domains = np.asarray(domains)
    if domains.dtype == bool:
        return domains
    unknown = set(domains.tolist()) - {SOURCE, TARGET}
    if unknown:
        raise DataError(f"Unknown domain tags: {sorted(unknown)}")
    return domains == SOURCE


def _both_domains(domains, n: int) -> np.ndarray:
    mask = _source_mask(domains)
    if mask.shape != (n,):
        raise ShapeError(f"Got {mask.shape[0] if mask.ndim else 0} domain tags for {n} scores")
    if n == 0:
        raise DataError("Confusion loss needs a non-empty batch")
    if mask.all() or not mask.any():
        raise DataError("Confusion loss needs at least one source and one target example")
    return mask


def nll(probs: Tensor, targets) -> Tensor:
    """Negative log-likelihood of the true class, summed over the batch."""
    probs = as_tensor(probs)
    onehot = _one_hot(targets, probs.shape[-1])
    if onehot.shape != probs.shape:
        raise ShapeError(f"nll: predictions {probs.shape} and targets {onehot.shape} differ")
    return -reduce_sum(_prob_floor(probs) * Tensor(onehot))


def confusion_h(d_scores: Tensor, domains) -> Tensor:
    """
    H-divergence confusion: sum over source of ln D(f) plus sum over target of ln(1 - D(f)).

    ``d_scores`` is either the (B, 2) examiner output, whose first column is the
    source probability, or a (B,) vector of source probabilities.
    """
    d_scores = as_tensor(d_scores)
    n = d_scores.shape[0] if d_scores.ndim else 0
    src = _both_domains(domains, n).astype(d_scores.data.dtype)
    if d_scores.ndim == 2 and d_scores.shape[1] == 2:
        log_src = reduce_sum(_prob_floor(take(d_scores, 0, 1, axis=1)), axis=1)
        log_tgt = reduce_sum(_prob_floor(take(d_scores, 1, 2, axis=1)), axis=1)
    elif d_scores.ndim == 1:
        log_src = _prob_floor(d_scores)
        log_tgt = _prob_floor(1.0 - d_scores)
    else:
        raise ShapeError(f"confusion_h: expected (B, 2) or (B,) scores, got {d_scores.shape}")
    return reduce_sum(log_src * Tensor(src)) + reduce_sum(log_tgt * Tensor(1.0 - src))


def confusion_w(critic_values: Tensor, domains) -> Tensor:
    """Mean critic value over source minus mean over target."""
    critic_values = as_tensor(critic_values)
    if critic_values.ndim != 1:
        raise ShapeError(f"confusion_w: expected (B,) critic values, got {critic_values.shape}")
    src = _both_domains(domains, critic_values.shape[0])
    weights = src / src.sum() - (~src) / (~src).sum()
    return reduce_sum(critic_values * Tensor(weights))


def covariance(feats: Tensor) -> Tensor:
    n = feats.shape[0]
    centered = feats - reduce_mean(feats, axis=0, keepdims=True)
    return matmul(transpose(centered), centered) * (1.0 / (n - 1))


def coral(source_feats: Tensor, target_feats: Tensor) -> Tensor:
    """Squared Frobenius distance between unbiased covariances, scaled by 1/(4 d^2)."""
    source_feats = as_tensor(source_feats)
    target_feats = as_tensor(target_feats)
    if source_feats.ndim != 2 or target_feats.ndim != 2:
        raise ShapeError(f"coral: expected matrices, got {source_feats.shape} and {target_feats.shape}")
    if source_feats.shape[1] != target_feats.shape[1]:
        raise ShapeError(f"coral: widths differ, {source_feats.shape} and {target_feats.shape}")
    if min(source_feats.shape[0], target_feats.shape[0]) < 2:
        raise DataError("coral: covariance needs at least 2 examples per domain")
    d = source_feats.shape[1]
    diff = covariance(source_feats) - covariance(target_feats)
    return reduce_sum(diff * diff) * (1.0 / (4.0 * d * d))


def _present(*terms):
    return [t for t in terms if t is not None]


def min_objective(components: LossComponents, weights: LossWeights,
                  aligner_kind=AlignerKind.NONE) -> Scalar:
    """L_stance + a L_subj + b L_obj + g (alignment terms); no alignment term without an aligner."""
    total = components.stance
    if components.subj is not None:
        total = total + weights.alpha * components.subj
    if components.obj is not None:
        total = total + weights.beta * components.obj
    if AlignerKind.parse(aligner_kind) is not AlignerKind.NONE:
        for term in _present(components.conf_subj, components.conf_obj):
            total = total + weights.gamma * term
    return total


def max_objective(components: LossComponents, aligner_kind) -> Scalar:
    """Sum of the confusion losses, maximized by the examiners."""
    if not AlignerKind.parse(aligner_kind).adversarial:
        raise ConfigurationError(f"max_objective requires an adversarial aligner, got '{aligner_kind}'")
    terms = _present(components.conf_subj, components.conf_obj)
    if not terms:
        raise ConfigurationError("max_objective: no confusion loss was computed")
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total


def descent_objective(components: LossComponents, weights: LossWeights, aligner_kind) -> Scalar:
    """
    Objective of the encoder/classifier descent step.

    Under ``h-adversarial`` the confusion terms must have been computed on
    features passed through ``reverse_gradient(f, gamma)``. They enter with
    weight -1: the reversal multiplies their feature gradient by -gamma, so
    the encoders receive +gamma dL_conf/df, the same pull ``min_objective``
    gives every other aligner. Examiners are frozen during this step, so the
    sign seen on their side never matters.
    """
    aligner_kind = AlignerKind.parse(aligner_kind)
    if aligner_kind is not AlignerKind.H_ADVERSARIAL:
        return min_objective(components, weights, aligner_kind)
    total = min_objective(
        LossComponents(stance=components.stance, subj=components.subj, obj=components.obj),
        weights, AlignerKind.NONE)
    for term in _present(components.conf_subj, components.conf_obj):
        total = total - term
    return total
