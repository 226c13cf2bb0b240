"""
Alternating min-max training.

Every outer iteration samples m source and m target utterances, runs ``n``
examiner ascent steps (``max_step``) when the aligner is adversarial, and one
descent step on encoders, gate and classifier heads (``min_step``).

Parameter groups are isolated: ``max_step`` only moves the examiners and
``min_step`` never moves them. Under the H-divergence aligner the encoders
receive the confusion gradient through a reversal layer in the same pass as
the classification losses; under the Wasserstein aligner the confusion loss
enters the descent objective directly. Both are assembled by
``descent_objective``.
"""
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from adaptation.data.corpus import Corpus, Example
from adaptation.data.sampling import sample_batches
from adaptation.engine.losses import (
    SOURCE, TARGET, LossComponents, LossWeights, confusion_h, confusion_w, coral, descent_objective,
    max_objective, nll,
)
from adaptation.engine.model import DanModel
from adaptation.engine.optim import Adam, clip_parameters, lr_at
from adaptation.engine.tensor import Tape, Tensor, no_grad, reverse_gradient, take
from adaptation.engine.variants import AlignerKind, ViewMode
from adaptation.exceptions import ConfigurationError, DataError, NumericalError
from adaptation.services.evaluation import macro_f1

logger = logging.getLogger(__name__)

# The lone view of a single-view model reports in the subj columns.
CONFUSION_SLOTS = {'subj': 'conf_subj', 'obj': 'conf_obj', 'main': 'conf_subj'}
AUXILIARY_SLOTS = {'subj': ('subj', 'silver_subj'), 'obj': ('obj', 'silver_obj')}

LOG_COLUMNS = ('iteration', 'lr', 'L_stance', 'L_subj', 'L_obj', 'L_conf_subj', 'L_conf_obj', 'val_macro_f1')


@dataclass
class TrainConfig:
    alpha: float = 0.1
    beta: float = 0.1
    gamma: float = 0.1
    lambda1: float = 1.0
    lambda2: float = 1.0
    batch_size: int = 8
    critic_steps: int = 5
    warmup: int = 100
    max_iterations: int = 2000
    patience: int = 10
    evaluate_every: int = 50
    clip: float = 0.01
    validation_fraction: float = 0.1
    seed: int = 13
    view_mode: ViewMode = ViewMode.DUAL
    aligner_kind: AlignerKind = AlignerKind.H_ADVERSARIAL

    def __post_init__(self):
        self.view_mode = ViewMode.parse(self.view_mode)
        self.aligner_kind = AlignerKind.parse(self.aligner_kind)
        self.weights  # validates the loss weights
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.aligner_kind.adversarial and self.critic_steps < 1:
            raise ConfigurationError(
                f"critic_steps must be at least 1 for the '{self.aligner_kind.value}' aligner")
        if self.warmup < 1 or self.evaluate_every < 1 or self.patience < 1:
            raise ConfigurationError("warmup, evaluate_every and patience must be positive")
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations cannot be negative")
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ConfigurationError("Learning-rate scales must be positive")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must lie in [0, 1)")

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta, self.gamma)


@dataclass
class IterationLog:
    iteration: int
    lr: float
    stance: float
    subj: Optional[float] = None
    obj: Optional[float] = None
    conf_subj: Optional[float] = None
    conf_obj: Optional[float] = None
    val_macro_f1: Optional[float] = None
    seconds: float = 0.0

    def losses(self) -> Tuple[Optional[float], ...]:
        return self.stance, self.subj, self.obj, self.conf_subj, self.conf_obj

    def to_row(self) -> str:
        cells = [str(self.iteration), repr(self.lr)]
        cells += ['' if v is None else repr(v) for v in self.losses()]
        cells.append('' if self.val_macro_f1 is None else repr(self.val_macro_f1))
        return '\t'.join(cells)


@dataclass
class TrainReport:
    iterations: List[IterationLog] = field(default_factory=list)
    validation_trace: List[Tuple[int, float]] = field(default_factory=list)
    best_iteration: Optional[int] = None
    best_val_f1: Optional[float] = None
    stopped_early: bool = False

    @property
    def best_checkpoint_id(self) -> Optional[str]:
        return None if self.best_iteration is None else f'iter-{self.best_iteration}'

    @property
    def loss_trace(self) -> List[Tuple[Optional[float], ...]]:
        return [log.losses() for log in self.iterations]

    @property
    def wall_clock(self) -> List[float]:
        return [log.seconds for log in self.iterations]


def write_training_log(report: TrainReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write('\t'.join(LOG_COLUMNS) + '\n')
        for log in report.iterations:
            fh.write(log.to_row() + '\n')
    return path


def split_validation(source: Corpus, fraction: float, seed: int) -> Tuple[Corpus, Corpus]:
    """(training, validation) split of the labeled source corpus."""
    return source.split(fraction, seed)


@contextmanager
def frozen(params: Mapping[str, Tensor]) -> Iterator[None]:
    """Stop gradient tracking for a parameter group; it ends with exactly zero gradients."""
    previous = {name: p.requires_grad for name, p in params.items()}
    for p in params.values():
        p.requires_grad = False
    try:
        yield
    finally:
        for name, p in params.items():
            p.requires_grad = previous[name]
            p.grad = np.zeros_like(p.data)


class Trainer:
    def __init__(self, model: DanModel, config: TrainConfig,
                 on_progress: Optional[Callable[[List[IterationLog]], None]] = None):
        if model.view_mode is not config.view_mode or model.aligner_kind is not config.aligner_kind:
            raise ConfigurationError(
                f"Model is '{model.variant}' but the training configuration asks for "
                f"view '{config.view_mode.value}' with aligner '{config.aligner_kind.value}'")
        self.model = model
        self.config = config
        self.weights = config.weights
        self.on_progress = on_progress
        self.main_optimizer = Adam(model.main_parameters())
        self.examiner_optimizer = Adam(model.examiner_parameters()) if model.examiners else None
        self.dropout_rng = np.random.default_rng([config.seed, 2])
        self._ids: Dict[Tuple[str, str], List[int]] = {}

    # ---------- helpers ----------

    def _token_ids(self, examples: Sequence[Example]) -> List[List[int]]:
        out = []
        for ex in examples:
            key = (ex.domain, ex.id)
            ids = self._ids.get(key)
            if ids is None:
                ids = self._ids[key] = self.model.table.ids_for(ex.tokens)
            out.append(ids)
        return out

    def _require_adversarial(self, operation: str) -> None:
        if not self.config.aligner_kind.adversarial:
            raise ConfigurationError(
                f"{operation} requires an adversarial aligner, got '{self.config.aligner_kind.value}'")

    def _confusion(self, scores: Tensor, domains: Sequence[str]) -> Tensor:
        if self.config.aligner_kind is AlignerKind.WASSERSTEIN:
            return confusion_w(scores, domains)
        return confusion_h(scores, domains)

    def _check_source_batch(self, batch: Sequence[Example]) -> None:
        for ex in batch:
            if ex.stance is None:
                raise DataError(f"Source example '{ex.id}' has no stance label")
            if self.model.view_mode.auxiliary_views and not ex.has_silver:
                raise DataError(f"Source example '{ex.id}' has no silver labels")

    @staticmethod
    def _finite(components: Dict[str, Optional[float]], step: int) -> None:
        for name, value in components.items():
            if value is not None and not np.isfinite(value):
                raise NumericalError(f"Loss term '{name}' is not finite at iteration {step}")

    # ---------- Algorithm steps ----------

    def max_step(self, batch_S: Sequence[Example], batch_T: Sequence[Example], step: int) -> Dict[str, Optional[float]]:
        """``critic_steps`` gradient-ascent updates of the domain examiners on one batch pair."""
        self._require_adversarial('max_step')
        model = self.model
        domains = [SOURCE] * len(batch_S) + [TARGET] * len(batch_T)
        with no_grad():
            feats = {view: Tensor(f.data) for view, f in
                     model.forward_views(self._token_ids(batch_S) + self._token_ids(batch_T)).items()}
        lr = self.config.lambda1 * lr_at(step, self.config.warmup)
        examiner_params = model.examiner_parameters()
        values: Dict[str, Optional[float]] = {}
        for _ in range(self.config.critic_steps):
            with Tape() as tape:
                tape.watch(*model.parameters().values())
                components = LossComponents()
                for view, f in feats.items():
                    scores = model.examiner_output(f, view)
                    setattr(components, CONFUSION_SLOTS[view], self._confusion(scores, domains))
                tape.backward(max_objective(components, self.config.aligner_kind))
            values = components.as_floats()
            self._finite(values, step)
            self.examiner_optimizer.step({name: p.grad for name, p in examiner_params.items()}, lr, ascent=True)
            if self.config.aligner_kind is AlignerKind.WASSERSTEIN:
                clip_parameters(examiner_params, self.config.clip)
        return {'conf_subj': values.get('conf_subj'), 'conf_obj': values.get('conf_obj')}

    def min_step(self, batch_S: Sequence[Example], batch_T: Sequence[Example], step: int) -> LossComponents:
        """One descent update of encoders, gate and heads on the composite objective."""
        self._check_source_batch(batch_S)
        model, config = self.model, self.config
        aligner = config.aligner_kind
        uses_target = aligner is not AlignerKind.NONE
        ids = self._token_ids(batch_S) + (self._token_ids(batch_T) if uses_target else [])
        m_s, m_t = len(batch_S), len(batch_T) if uses_target else 0
        domains = [SOURCE] * m_s + [TARGET] * m_t

        with frozen(model.examiner_parameters()), Tape() as tape:
            tape.watch(*model.main_parameters().values())
            views = model.forward_views(ids, rng=self.dropout_rng)
            source_views = {v: take(f, 0, m_s, axis=0) if uses_target else f for v, f in views.items()}

            components = LossComponents()
            stance_targets = [ex.stance_index for ex in batch_S]
            components.stance = nll(model.stance_probabilities(source_views), stance_targets)
            for view in model.view_mode.auxiliary_views:
                slot, attr = AUXILIARY_SLOTS[view]
                silver = [getattr(ex, attr) for ex in batch_S]
                setattr(components, slot, nll(model.auxiliary_predict(source_views[view], view), silver))

            for view, f in views.items():
                slot = CONFUSION_SLOTS[view]
                if aligner is AlignerKind.CORAL:
                    setattr(components, slot, coral(source_views[view], take(f, m_s, m_s + m_t, axis=0)))
                elif aligner is AlignerKind.WASSERSTEIN:
                    setattr(components, slot, confusion_w(model.examiner_output(f, view), domains))
                elif aligner is AlignerKind.H_ADVERSARIAL:
                    reversed_f = reverse_gradient(f, self.weights.gamma)
                    setattr(components, slot, confusion_h(model.examiner_output(reversed_f, view), domains))
            tape.backward(descent_objective(components, self.weights, aligner))

        self._finite(components.as_floats(), step)
        lr = config.lambda2 * lr_at(step, config.warmup)
        self.main_optimizer.step({name: p.grad for name, p in model.main_parameters().items()}, lr)
        return components

    # ---------- loop ----------

    def _validate_inputs(self, source: Corpus, target: Corpus) -> None:
        if not len(source) or not len(target):
            raise DataError("Training needs non-empty source and target corpora")
        self._check_source_batch(source.examples)
        for corpus in (source, target):
            for ex in corpus:
                if not ex.tokens:
                    raise DataError(f"Example '{ex.id}' has no tokens")

    def validation_f1(self, validation: Corpus) -> float:
        predicted = self.model.predict_labels(self._token_ids(validation.examples))
        return macro_f1(predicted, [ex.stance for ex in validation])

    def train(self, source: Corpus, target: Corpus, validation: Optional[Corpus] = None) -> TrainReport:
        self._validate_inputs(source, target)
        config = self.config
        report = TrainReport()
        pending: List[IterationLog] = []
        has_validation = validation is not None and len(validation) > 0
        if config.max_iterations and not has_validation:
            logger.warning("No validation data; the final parameters are kept")
        best_state = None
        bad_evaluations = 0

        logger.info("Training %s for up to %d iterations (m=%d, n=%d)", self.model.variant,
                    config.max_iterations, config.batch_size, config.critic_steps)
        for step in range(1, config.max_iterations + 1):
            started = time.perf_counter()
            batch_S, batch_T = sample_batches(source, target, config.batch_size, config.seed, step - 1)
            if config.aligner_kind.adversarial:
                self.max_step(batch_S, batch_T, step)
            components = self.min_step(batch_S, batch_T, step).as_floats()
            log = IterationLog(iteration=step, lr=config.lambda2 * lr_at(step, config.warmup), **components)

            evaluate_now = has_validation and (step % config.evaluate_every == 0 or step == config.max_iterations)
            if evaluate_now:
                log.val_macro_f1 = self.validation_f1(validation)
                report.validation_trace.append((step, log.val_macro_f1))
                logger.info("iteration %d: L_stance %.4f, validation macro-F1 %.4f",
                            step, log.stance, log.val_macro_f1)
                if report.best_val_f1 is None or log.val_macro_f1 > report.best_val_f1:
                    report.best_val_f1 = log.val_macro_f1
                    report.best_iteration = step
                    best_state = self.model.state_dict()
                    bad_evaluations = 0
                else:
                    bad_evaluations += 1
            log.seconds = time.perf_counter() - started
            report.iterations.append(log)
            pending.append(log)

            if evaluate_now or step == config.max_iterations:
                self._flush(pending)
            if evaluate_now and bad_evaluations >= config.patience:
                report.stopped_early = True
                logger.info("Early stop at iteration %d; best iteration %d", step, report.best_iteration)
                break

        self._flush(pending)
        if best_state is not None:
            self.model.load_state_dict(best_state)
        return report

    def _flush(self, pending: List[IterationLog]) -> None:
        if pending and self.on_progress is not None:
            self.on_progress(list(pending))
        pending.clear()


def train(model: DanModel, source: Corpus, target: Corpus, validation: Optional[Corpus],
          config: TrainConfig, on_progress: Optional[Callable[[List[IterationLog]], None]] = None) -> TrainReport:
    return Trainer(model, config, on_progress=on_progress).train(source, target, validation)
