"""
Silver subjectivity/objectivity labels.

A bag-of-words logistic labeler is trained on a two-class subjectivity
corpus (``subj|obj<TAB>text`` per line) and applied to every utterance.
Labels can also be exchanged as ``id<TAB>subj<TAB>obj`` files, so externally
produced labels replace the internal labeler.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.linear_model import LogisticRegression

from adaptation.data.corpus import Corpus
from adaptation.data.tokenizer import tokenize
from adaptation.exceptions import DataError

logger = logging.getLogger(__name__)

SUBJ = 'subj'
OBJ = 'obj'
MAX_EPOCHS = 200
TOLERANCE = 1e-6


def _pretokenized(tokens):
    return tokens


@dataclass
class SilverLabeler:
    """Linear scorer: p = sigmoid(w . counts + b); label 1 iff p >= 0.5."""
    name: str
    vocabulary: Dict[str, int]
    weights: np.ndarray
    bias: float

    def _counts(self, documents: Sequence[Sequence[str]]):
        vectorizer = CountVectorizer(analyzer=_pretokenized, vocabulary=self.vocabulary)
        return vectorizer.transform([list(doc) for doc in documents])

    def predict_proba(self, documents: Sequence[Sequence[str]]) -> np.ndarray:
        if not len(documents):
            return np.zeros(0)
        scores = self._counts(documents) @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-scores))

    def predict(self, documents: Sequence[Sequence[str]]) -> np.ndarray:
        return (self.predict_proba(documents) >= 0.5).astype(int)


def load_subjectivity_corpus(path: Union[str, Path]) -> List[Tuple[str, List[str]]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Subjectivity corpus not found: {path}")
    rows = []
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            label, sep, text = line.partition('\t')
            label = label.strip().lower()
            if not sep or label not in (SUBJ, OBJ):
                raise DataError(f"{path}:{lineno}: expected 'subj|obj<TAB>text'")
            rows.append((label, tokenize(text)))
    return rows


def train_silver_labeler(corpus: Sequence[Tuple[str, Sequence[str]]], positive: str = SUBJ,
                         seed: int = 0) -> SilverLabeler:
    """Fit a logistic labeler where ``positive`` examples get label 1."""
    if positive not in (SUBJ, OBJ):
        raise DataError(f"Unknown silver view '{positive}'")
    labels = np.array([int(label == positive) for label, _ in corpus])
    if labels.size == 0 or labels.min() == labels.max():
        raise DataError("Silver labeler needs both subjective and objective training sentences")
    documents = [list(tokens) for _, tokens in corpus]
    vectorizer = CountVectorizer(analyzer=_pretokenized)
    features = vectorizer.fit_transform(documents)
    model = LogisticRegression(max_iter=MAX_EPOCHS, tol=TOLERANCE, random_state=seed)
    model.fit(features, labels)
    vocabulary = {tok: int(idx) for tok, idx in vectorizer.vocabulary_.items()}
    labeler = SilverLabeler(
        name=positive,
        vocabulary=vocabulary,
        weights=model.coef_[0].astype(np.float64),
        bias=float(model.intercept_[0]),
    )
    accuracy = float((labeler.predict(documents) == labels).mean())
    logger.info("Trained %s labeler on %d sentences (training accuracy %.3f)", positive, len(labels), accuracy)
    return labeler


def train_view_labelers(corpus: Sequence[Tuple[str, Sequence[str]]], seed: int = 0
                        ) -> Tuple[SilverLabeler, SilverLabeler]:
    return train_silver_labeler(corpus, SUBJ, seed), train_silver_labeler(corpus, OBJ, seed)


def assign_silver_labels(corpus: Corpus, subj_labeler: SilverLabeler, obj_labeler: SilverLabeler) -> Corpus:
    """Attach independent subjectivity and objectivity labels; stance labels are never read."""
    documents = [ex.tokens for ex in corpus]
    subj = subj_labeler.predict(documents)
    obj = obj_labeler.predict(documents)
    labels = {ex.id: (int(s), int(o)) for ex, s, o in zip(corpus, subj, obj)}
    return corpus.with_silver(labels)


def read_silver_labels(path: Union[str, Path]) -> Dict[str, Tuple[int, int]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Silver-label file not found: {path}")
    labels: Dict[str, Tuple[int, int]] = {}
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            cols = line.split('\t')
            if len(cols) != 3 or cols[1] not in ('0', '1') or cols[2] not in ('0', '1'):
                raise DataError(f"{path}:{lineno}: expected 'id<TAB>0|1<TAB>0|1'")
            labels[cols[0]] = (int(cols[1]), int(cols[2]))
    return labels


def write_silver_labels(corpus: Corpus, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        for ex in corpus:
            if not ex.has_silver:
                raise DataError(f"Example '{ex.id}' has no silver labels")
            fh.write(f"{ex.id}\t{ex.silver_subj}\t{ex.silver_obj}\n")
    return path
