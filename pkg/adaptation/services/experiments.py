import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from django.db import transaction

from adaptation.data.corpus import Corpus, load_corpus
from adaptation.data.embeddings import load_embeddings
from adaptation.data.silver import (
    assign_silver_labels, load_subjectivity_corpus, read_silver_labels, train_view_labelers,
)
from adaptation.engine.checkpoint import save_checkpoint
from adaptation.engine.losses import SOURCE, TARGET
from adaptation.engine.model import DanModel, ModelConfig, sample_hidden_sizes
from adaptation.engine.tensor import get_default_dtype, set_default_dtype
from adaptation.engine.variants import AlignerKind, ViewMode
from adaptation.exceptions import AdaptationError, ConfigurationError
from adaptation.models import ExperimentRun
from adaptation.repositories.repositories import ExperimentRunRepository, IterationRecordRepository
from adaptation.services.evaluation import evaluate
from adaptation.services.training import (
    IterationLog, TrainConfig, TrainReport, Trainer, split_validation, write_training_log,
)
from adaptation.signals import iterations_logged

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.dan'
TRAINING_LOG_NAME = 'training_log.tsv'
METRICS_NAME = 'metrics.json'


# =============================================================================
# CONFIG TRANSLATION
# =============================================================================

def train_config_from(config: Dict[str, Any]) -> TrainConfig:
    return TrainConfig(
        alpha=config['alpha'],
        beta=config['beta'],
        gamma=config['gamma'],
        lambda1=config['lambda1'],
        lambda2=config['lambda2'],
        batch_size=config['batch_size'],
        critic_steps=config['critic_steps'],
        warmup=config['warmup'],
        max_iterations=config['max_iterations'],
        patience=config['patience'],
        evaluate_every=config['evaluate_every'],
        clip=config['clip'],
        validation_fraction=config['validation_fraction'],
        seed=config['seed'],
        view_mode=config['view_mode'],
        aligner_kind=config['aligner'],
    )


def model_config_from(config: Dict[str, Any], d_e: int) -> ModelConfig:
    d_h, d_f = config['d_h'], config['d_f']
    if config.get('sample_hidden'):
        d_h, d_f = sample_hidden_sizes(np.random.default_rng([config['seed'], 3]))
        logger.info("Sampled hidden sizes d_h=%d, d_f=%d", d_h, d_f)
    return ModelConfig(
        d_e=d_e,
        d_h=d_h,
        d_f=d_f,
        view_mode=config['view_mode'],
        aligner_kind=config['aligner'],
        pooling=config['pooling'],
        dropout=config['dropout'],
        seed=config['seed'],
    )


# =============================================================================
# EXPERIMENT PIPELINE
# =============================================================================

@dataclass
class ExperimentResult:
    model: DanModel
    report: TrainReport
    metrics: Dict[str, Any]
    paths: Dict[str, Path] = field(default_factory=dict)


def attach_silver_labels(config: Dict[str, Any], source: Corpus, target: Corpus):
    """Silver labels from files when configured, otherwise from labelers fit on the subjectivity corpus."""
    if config.get('source_silver'):
        source = source.with_silver(read_silver_labels(config['source_silver']))
        if config.get('target_silver'):
            target = target.with_silver(read_silver_labels(config['target_silver']))
        return source, target
    if config.get('subjectivity_corpus'):
        subj, obj = train_view_labelers(load_subjectivity_corpus(config['subjectivity_corpus']), seed=config['seed'])
        return assign_silver_labels(source, subj, obj), assign_silver_labels(target, subj, obj)
    if ViewMode.parse(config['view_mode']).auxiliary_views:
        raise ConfigurationError("Multi-view models need source_silver or subjectivity_corpus")
    return source, target


def run_experiment(config: Dict[str, Any],
                   on_progress: Optional[Callable[[List[IterationLog]], None]] = None) -> ExperimentResult:
    """Load data, train one configuration and write checkpoint, training log and metrics."""
    previous_dtype = get_default_dtype()
    set_default_dtype(config['precision'])
    try:
        source = load_corpus(config['source'], SOURCE)
        target = load_corpus(config['target'], TARGET)
        source, target = attach_silver_labels(config, source, target)
        train_source, validation = split_validation(source, config['validation_fraction'], config['seed'])

        table = load_embeddings(config['embeddings'], [source, target], expected_dim=config.get('embedding_dim'),
                                trainable=config['trainable_embeddings'])
        model = DanModel(model_config_from(config, table.d_e), table)
        logger.info("Built %r", model)

        report = Trainer(model, train_config_from(config), on_progress=on_progress).train(
            train_source, target, validation)

        metrics: Dict[str, Any] = {
            'variant': model.variant,
            'seed': config['seed'],
            'd_h': model.config.d_h,
            'd_f': model.config.d_f,
            'iterations_run': len(report.iterations),
            'best_iteration': report.best_iteration,
            'stopped_early': report.stopped_early,
            'val_macro_f1': report.best_val_f1,
            'target_macro_f1': None,
        }
        if config.get('target_gold'):
            result = evaluate(model, load_corpus(config['target_gold'], TARGET))
            metrics['target_macro_f1'] = result.macro_f1
            metrics['target_semeval_f1'] = result.semeval_f1
            metrics['target_accuracy'] = result.accuracy

        out = Path(config['output_dir'])
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            'checkpoint': save_checkpoint(model, out / CHECKPOINT_NAME),
            'training_log': write_training_log(report, out / TRAINING_LOG_NAME),
            'metrics': out / METRICS_NAME,
        }
        paths['metrics'].write_text(json.dumps(metrics, indent=2) + '\n', encoding='utf-8')
        logger.info("Run %s finished: validation macro-F1 %s, outputs in %s",
                    model.variant, metrics['val_macro_f1'], out)
        return ExperimentResult(model=model, report=report, metrics=metrics, paths=paths)
    finally:
        set_default_dtype(previous_dtype)


# =============================================================================
# EXPERIMENT SERVICE
# =============================================================================

class ExperimentService:
    """Service layer for persisted experiment runs."""

    def __init__(self):
        self.run_repository = ExperimentRunRepository()
        self.iteration_repository = IterationRecordRepository()

    def get_user_runs(self, user):
        return self.run_repository.get_by_user(user)

    def get_run_iterations(self, run: ExperimentRun, after: int = 0):
        return self.iteration_repository.get_by_run(run.id, after=after)

    def create_run(self, user, config: Dict[str, Any], name: str = '') -> ExperimentRun:
        """Record a validated configuration as a pending run."""
        run = self.run_repository.create(
            name=name,
            view_mode=ViewMode.parse(config['view_mode']).value,
            aligner_kind=AlignerKind.parse(config['aligner']).value,
            seed=config['seed'],
            config=config,
            created_by=user if getattr(user, 'is_authenticated', False) else None,
        )
        output_dir = str(Path(config['output_dir']) / str(run.id))
        run.config = {**config, 'output_dir': output_dir}
        return self.run_repository.update(run, output_dir=output_dir)

    def enqueue(self, run: ExperimentRun) -> ExperimentRun:
        from adaptation.tasks import run_experiment as run_experiment_task

        transaction.on_commit(lambda: run_experiment_task.delay(str(run.id)))
        return run

    def _record_progress(self, run: ExperimentRun) -> Callable[[List[IterationLog]], None]:
        def record(logs: List[IterationLog]) -> None:
            self.iteration_repository.bulk_create_for_run(run, logs)
            iterations_logged.send(sender=ExperimentRun, run_id=run.id,
                                   iterations=[log.iteration for log in logs])
        return record

    def execute(self, run: ExperimentRun) -> ExperimentRun:
        """Run a stored configuration to completion; failures are recorded on the run and re-raised."""
        self.iteration_repository.clear_run(run.id)
        self.run_repository.mark_running(run)
        try:
            result = run_experiment(run.config, on_progress=self._record_progress(run))
        except AdaptationError as exc:
            logger.error("Run %s failed: %s", run.id, exc)
            self.run_repository.mark_failed(run, str(exc))
            raise
        return self.run_repository.mark_finished(
            run,
            best_iteration=result.metrics['best_iteration'],
            iterations_run=result.metrics['iterations_run'],
            stopped_early=result.metrics['stopped_early'],
            val_macro_f1=result.metrics['val_macro_f1'],
            target_macro_f1=result.metrics['target_macro_f1'],
        )
