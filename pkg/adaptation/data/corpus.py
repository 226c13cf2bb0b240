"""
Utterance corpora and their TSV format (``id<TAB>topic<TAB>text<TAB>stance``).
"""
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from adaptation.data.tokenizer import tokenize
from adaptation.engine.losses import SOURCE, TARGET
from adaptation.engine.model import STANCE_CLASSES
from adaptation.exceptions import DataError

logger = logging.getLogger(__name__)

HEADER = ('id', 'topic', 'text', 'stance')
UNKNOWN = 'UNKNOWN'

# SemEval spellings are accepted on ingest.
STANCE_ALIASES = {
    'favour': 'favour',
    'favor': 'favour',
    'against': 'against',
    'neutral': 'neutral',
    'none': 'neutral',
}


def parse_stance(raw: str) -> Optional[str]:
    value = raw.strip()
    if value.upper() == UNKNOWN:
        return None
    try:
        return STANCE_ALIASES[value.lower()]
    except KeyError:
        raise DataError(f"Unknown stance '{raw}'") from None


@dataclass(frozen=True)
class Example:
    id: str
    topic: str
    text: str
    tokens: Tuple[str, ...]
    domain: str
    stance: Optional[str] = None
    silver_subj: Optional[int] = None
    silver_obj: Optional[int] = None

    @property
    def has_silver(self) -> bool:
        return self.silver_subj is not None and self.silver_obj is not None

    @property
    def stance_index(self) -> int:
        return STANCE_CLASSES.index(self.stance)


@dataclass
class Corpus:
    examples: List[Example] = field(default_factory=list)
    domain: str = SOURCE

    def __post_init__(self):
        if self.domain not in (SOURCE, TARGET):
            raise DataError(f"Unknown domain tag '{self.domain}'")
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise DataError(f"Duplicate example id '{ex.id}'")
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def __getitem__(self, index: int) -> Example:
        return self.examples[index]

    @property
    def topic(self) -> str:
        topics = sorted({ex.topic for ex in self.examples})
        return ','.join(topics)

    @property
    def label_histogram(self) -> Dict[str, int]:
        counts = Counter(ex.stance for ex in self.examples if ex.stance is not None)
        return {label: counts.get(label, 0) for label in STANCE_CLASSES}

    @property
    def is_labeled(self) -> bool:
        return all(ex.stance is not None for ex in self.examples)

    def by_id(self) -> Dict[str, Example]:
        return {ex.id: ex for ex in self.examples}

    def subset(self, indices: Sequence[int]) -> 'Corpus':
        return Corpus([self.examples[i] for i in indices], domain=self.domain)

    def without_stance(self) -> 'Corpus':
        return Corpus([replace(ex, stance=None) for ex in self.examples], domain=self.domain)

    def with_silver(self, labels: Dict[str, Tuple[int, int]]) -> 'Corpus':
        missing = [ex.id for ex in self.examples if ex.id not in labels]
        if missing:
            raise DataError(f"No silver labels for {len(missing)} example(s), e.g. '{missing[0]}'")
        return Corpus(
            [replace(ex, silver_subj=int(labels[ex.id][0]), silver_obj=int(labels[ex.id][1]))
             for ex in self.examples],
            domain=self.domain,
        )

    def split(self, fraction: float, seed: int) -> Tuple['Corpus', 'Corpus']:
        """Deterministic (kept, held-out) split; the held-out part gets ``fraction`` of the examples."""
        n = len(self.examples)
        held = int(round(fraction * n)) if n > 1 else 0
        order = np.random.default_rng(seed).permutation(n)
        held_idx = sorted(order[:held].tolist())
        kept_idx = sorted(order[held:].tolist())
        return self.subset(kept_idx), self.subset(held_idx)


def load_corpus(path: Union[str, Path], domain: str) -> Corpus:
    """Parse a corpus TSV; fails on the first malformed line without returning partial data."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"Corpus file not found: {path}")
    examples: List[Example] = []
    with open(path, encoding='utf-8') as fh:
        header = fh.readline().rstrip('\r\n').split('\t')
        if tuple(h.strip().lower() for h in header) != HEADER:
            raise DataError(f"{path}:1: expected header {'<TAB>'.join(HEADER)}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            cols = line.split('\t')
            if len(cols) != len(HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(HEADER)} columns, found {len(cols)}")
            ex_id, topic, text, stance = cols
            try:
                label = parse_stance(stance)
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            examples.append(Example(
                id=ex_id, topic=topic, text=text, tokens=tuple(tokenize(text)),
                domain=domain, stance=label,
            ))
    corpus = Corpus(examples, domain=domain)
    logger.info("Loaded %d %s examples from %s", len(corpus), domain, path)
    return corpus


def write_corpus(corpus: Corpus, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write('\t'.join(HEADER) + '\n')
        for ex in corpus:
            if any(ch in ex.text for ch in '\t\n'):
                raise DataError(f"Example '{ex.id}' text contains a tab or newline")
            fh.write(f"{ex.id}\t{ex.topic}\t{ex.text}\t{ex.stance or UNKNOWN}\n")
    return path
