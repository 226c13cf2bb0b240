"""
Macro-F1 scoring, feature export and the proxy A-distance between domains.
"""
import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import SGDClassifier
from sklearn.metrics import accuracy_score, f1_score
from sklearn.model_selection import StratifiedGroupKFold, StratifiedKFold, train_test_split
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from adaptation.data.corpus import Corpus
from adaptation.engine.model import STANCE_CLASSES, DanModel
from adaptation.engine.tensor import no_grad
from adaptation.engine.variants import ViewMode
from adaptation.exceptions import ConfigurationError, DataError, ShapeError

logger = logging.getLogger(__name__)

SEMEVAL_CLASSES = ('favour', 'against')
FEATURE_VIEWS = ('subj', 'obj', 'dual')

PAD_MIN_PER_DOMAIN = 5
PAD_FOLDS = 1
PAD_TEST_FRACTION = 0.2
PAD_EPOCHS = 20
PAD_LEARNING_RATE = 0.01


# =============================================================================
# MACRO-F1
# =============================================================================

def macro_f1(predictions: Sequence[str], gold: Sequence[str], classes: Sequence[str] = STANCE_CLASSES) -> float:
    """Unweighted mean of per-class F1 over ``classes``; a class nobody uses scores 0."""
    if len(predictions) != len(gold):
        raise ShapeError(f"macro_f1: {len(predictions)} predictions for {len(gold)} gold labels")
    if not len(gold):
        raise DataError("macro_f1: no examples to score")
    used = set(gold) | set(predictions)
    absent = [c for c in classes if c not in used]
    if absent:
        logger.info("Classes absent from gold and predictions score F1 = 0: %s", ', '.join(absent))
    return float(f1_score(list(gold), list(predictions), labels=list(classes), average='macro', zero_division=0))


def semeval_macro_f1(predictions: Sequence[str], gold: Sequence[str]) -> float:
    """Favour/against average used by the SemEval stance task."""
    return macro_f1(predictions, gold, SEMEVAL_CLASSES)


@dataclass
class EvaluationResult:
    macro_f1: float
    semeval_f1: float
    accuracy: float
    n: int

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def evaluate(model: DanModel, corpus: Corpus) -> EvaluationResult:
    if not corpus.is_labeled:
        raise DataError("Evaluation corpus must carry a stance label on every example")
    gold = [ex.stance for ex in corpus]
    predicted = model.predict_labels([model.table.ids_for(ex.tokens) for ex in corpus])
    return EvaluationResult(
        macro_f1=macro_f1(predicted, gold),
        semeval_f1=semeval_macro_f1(predicted, gold),
        accuracy=float(accuracy_score(gold, predicted)),
        n=len(gold),
    )


# =============================================================================
# FEATURE DUMPS
# =============================================================================

@dataclass
class FeatureDump:
    view: str
    ids: List[str]
    domains: List[str]
    labels: List[Optional[str]]
    features: np.ndarray

    def __post_init__(self):
        if self.view not in FEATURE_VIEWS:
            raise ConfigurationError(f"Unknown feature view '{self.view}'")
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ShapeError(f"Feature matrix must be 2-D, got {self.features.shape}")
        n = self.features.shape[0]
        if not len(self.ids) == len(self.domains) == len(self.labels) == n:
            raise ShapeError("Feature dump columns have different lengths")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def for_domain(self, domain: str) -> 'FeatureDump':
        keep = [i for i, d in enumerate(self.domains) if d == domain]
        return FeatureDump(
            view=self.view,
            ids=[self.ids[i] for i in keep],
            domains=[self.domains[i] for i in keep],
            labels=[self.labels[i] for i in keep],
            features=self.features[keep].reshape(len(keep), self.width),
        )

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(['id', 'domain', 'label'] + [f'f_{i}' for i in range(self.width)])
            for ex_id, domain, label, row in zip(self.ids, self.domains, self.labels, self.features):
                writer.writerow([ex_id, domain, label or ''] + [repr(float(v)) for v in row])
        return path

    @classmethod
    def read_csv(cls, path: Union[str, Path], view: str = 'dual') -> 'FeatureDump':
        path = Path(path)
        if not path.exists():
            raise DataError(f"Feature dump not found: {path}")
        with open(path, encoding='utf-8', newline='') as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[:3] != ['id', 'domain', 'label']:
                raise DataError(f"{path}:1: expected header id,domain,label,f_0,...")
            width = len(header) - 3
            ids, domains, labels, rows = [], [], [], []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != width + 3:
                    raise DataError(f"{path}:{lineno}: expected {width + 3} columns, found {len(row)}")
                ids.append(row[0])
                domains.append(row[1])
                labels.append(row[2] or None)
                try:
                    rows.append([float(v) for v in row[3:]])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
        features = np.array(rows, dtype=np.float64).reshape(len(rows), width)
        return cls(view=view, ids=ids, domains=domains, labels=labels, features=features)


def compute_features(model: DanModel, corpus: Corpus, view: str, chunk: int = 64) -> np.ndarray:
    if view not in FEATURE_VIEWS:
        raise ConfigurationError(f"Unknown feature view '{view}' (expected one of {', '.join(FEATURE_VIEWS)})")
    if view != 'dual' and view not in model.encoders:
        raise ConfigurationError(f"Model '{model.variant}' has no '{view}' view")
    blocks = []
    ids = [model.table.ids_for(ex.tokens) for ex in corpus]
    with no_grad():
        for start in range(0, len(ids), chunk):
            views = model.forward_views(ids[start:start + chunk])
            feats = model.stance_feature(views) if view == 'dual' else views[view]
            blocks.append(feats.data)
    if not blocks:
        return np.zeros((0, model.d_h))
    return np.vstack(blocks)


def export_features(model: DanModel, corpus: Corpus, view: str,
                    path: Optional[Union[str, Path]] = None) -> FeatureDump:
    """Per-example features of one view; ``dual`` is the stance feature, fused when the model fuses."""
    dump = FeatureDump(
        view=view,
        ids=[ex.id for ex in corpus],
        domains=[ex.domain for ex in corpus],
        labels=[ex.stance for ex in corpus],
        features=compute_features(model, corpus, view),
    )
    if path is not None:
        dump.write_csv(path)
        logger.info("Exported %d %s features to %s", len(dump), view, path)
    return dump


def default_pad_view(model: DanModel) -> str:
    return 'dual' if model.view_mode in (ViewMode.SINGLE, ViewMode.DUAL) else model.view_mode.views[0]


# =============================================================================
# PROXY A-DISTANCE
# =============================================================================

@dataclass
class PadEstimate:
    epsilon: float
    pad: float
    n_source: int
    n_target: int
    view: str
    probe: str = ''

    def to_record(self) -> Dict[str, object]:
        return {
            'epsilon': self.epsilon,
            'pad': self.pad,
            'n_source': self.n_source,
            'n_target': self.n_target,
            'view': self.view,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=False)


def pad_from_error(epsilon: float) -> float:
    return 2.0 * (1.0 - 2.0 * epsilon)


def _both_domains(y: np.ndarray) -> bool:
    return np.unique(y).size == 2


def pad_splits(X: np.ndarray, y: np.ndarray, folds: int = PAD_FOLDS,
               seed: int = 0) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    (train, test) index pairs for the probe.

    ``folds == 1`` is one stratified 80/20 split; larger values are stratified
    k-fold splits whose errors get averaged. Rows with identical features are
    kept on one side of each split when the groups allow a split with both
    domains on both sides; otherwise rows are split individually.
    """
    _, groups = np.unique(X, axis=0, return_inverse=True)
    groups = np.asarray(groups).reshape(-1)
    n_splits = folds if folds > 1 else int(round(1.0 / PAD_TEST_FRACTION))
    splits: List[Tuple[np.ndarray, np.ndarray]] = []
    if np.unique(groups).size >= n_splits:
        grouped = StratifiedGroupKFold(n_splits=n_splits, shuffle=True, random_state=seed)
        splits = list(grouped.split(X, y, groups))[:folds]
    if splits and all(_both_domains(y[train]) and _both_domains(y[test]) for train, test in splits):
        return splits
    if folds == 1:
        train, test = train_test_split(np.arange(len(y)), test_size=PAD_TEST_FRACTION, stratify=y,
                                       random_state=seed)
        return [(train, test)]
    return list(StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed).split(X, y))


def proxy_a_distance(source: FeatureDump, target: FeatureDump, folds: int = PAD_FOLDS, seed: int = 0,
                     epochs: int = PAD_EPOCHS, learning_rate: float = PAD_LEARNING_RATE) -> PadEstimate:
    """
    Train a hinge-loss linear probe to tell source from target features and
    turn its held-out error into 2(1 - 2 eps).

    The default is one stratified 80/20 split; ``folds > 1`` averages the
    error over stratified folds instead.
    """
    if source.width != target.width:
        raise ShapeError(f"PAD: source width {source.width} differs from target width {target.width}")
    smallest = min(len(source), len(target))
    if smallest < PAD_MIN_PER_DOMAIN:
        raise DataError(f"PAD needs at least {PAD_MIN_PER_DOMAIN} examples per domain, "
                        f"got {len(source)} source and {len(target)} target")
    if not 1 <= folds <= smallest:
        raise ConfigurationError(f"PAD folds must lie in [1, {smallest}], got {folds}")
    X = np.vstack([source.features, target.features])
    if not np.all(np.isfinite(X)):
        raise DataError("PAD: feature dumps contain non-finite values")
    if not np.any(np.ptp(X, axis=0) > 0.0):
        raise DataError("PAD: every feature row is identical; there is nothing for a probe to separate")
    y = np.concatenate([np.zeros(len(source), dtype=int), np.ones(len(target), dtype=int)])

    errors = []
    for train_idx, test_idx in pad_splits(X, y, folds, seed):
        probe = make_pipeline(
            StandardScaler(),
            SGDClassifier(loss='hinge', learning_rate='constant', eta0=learning_rate,
                          max_iter=epochs, tol=None, random_state=seed),
        )
        try:
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', ConvergenceWarning)
                probe.fit(X[train_idx], y[train_idx])
        except ValueError as exc:
            raise DataError(f"PAD probe could not be trained: {exc}") from exc
        errors.append(1.0 - probe.score(X[test_idx], y[test_idx]))
    epsilon = float(np.mean(errors))
    split = '80/20 split' if folds == 1 else f'{folds} folds'
    estimate = PadEstimate(
        epsilon=epsilon,
        pad=pad_from_error(epsilon),
        n_source=len(source),
        n_target=len(target),
        view=source.view,
        probe=f'hinge linear probe, {epochs} epochs, lr {learning_rate}, {split}',
    )
    logger.info("PAD %.4f (epsilon %.4f) over %d source / %d target", estimate.pad, epsilon,
                len(source), len(target))
    return estimate
