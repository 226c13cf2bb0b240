"""
Synthetic two-domain stance corpora with a controllable lexical shift.

Each utterance mixes filler words with planted cue words. Every stance owns a
set of subjective cues and a set of objective cues, and the stance of an
utterance is the stance of its cues, so the label rule is deterministic.
Silver labels record which cue types were planted. The target domain swaps
a ``shift`` fraction of tokens for domain-specific synonyms whose vectors
sit near the originals, displaced by one common shift vector.
"""
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from adaptation.data.corpus import Corpus, Example, write_corpus
from adaptation.data.embeddings import write_embedding_file
from adaptation.data.silver import write_silver_labels
from adaptation.engine.losses import SOURCE, TARGET
from adaptation.engine.model import STANCE_CLASSES
from adaptation.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

CUE_TYPES = ('subj', 'obj', 'both')
TARGET_SUFFIX = '_t'


@dataclass
class SyntheticSpec:
    n_source: int = 2000
    n_target: int = 2000
    shift: float = 0.6
    seed: int = 13
    d_e: int = 32
    n_filler: int = 150
    cues_per_stance: int = 6
    min_length: int = 6
    max_length: int = 14
    max_cues: int = 3
    cue_type_weights: Tuple[float, float, float] = (0.4, 0.4, 0.2)
    shift_scale: float = 1.0
    synonym_noise: float = 0.15
    source_topic: str = 'alpha'
    target_topic: str = 'beta'

    def __post_init__(self):
        if not 0.0 <= self.shift <= 1.0:
            raise ConfigurationError(f"Shift rate must lie in [0, 1], got {self.shift}")
        if self.n_source < 1 or self.n_target < 1:
            raise ConfigurationError("Synthetic corpora need at least one example each")
        if self.min_length < 2 or self.max_length < self.min_length:
            raise ConfigurationError("Invalid utterance length range")
        if self.max_cues < 1 or self.max_cues > self.min_length:
            raise ConfigurationError("max_cues must lie in [1, min_length]")


@dataclass
class SyntheticData:
    spec: SyntheticSpec
    source: Corpus
    target: Corpus
    target_gold: Corpus
    words: List[str] = field(default_factory=list)
    vectors: np.ndarray = None


def cue_lexicon(spec: SyntheticSpec) -> Dict[Tuple[str, str], List[str]]:
    """(stance, cue type) -> cue words."""
    return {
        (stance, kind): [f'{stance}_{kind}{k}' for k in range(spec.cues_per_stance)]
        for stance in STANCE_CLASSES for kind in ('subj', 'obj')
    }


def _base_words(spec: SyntheticSpec) -> List[str]:
    words = [f'w{k}' for k in range(spec.n_filler)]
    for cues in cue_lexicon(spec).values():
        words.extend(cues)
    return words


def _utterance(rng: np.random.Generator, spec: SyntheticSpec, lexicon, fillers: List[str]):
    stance = STANCE_CLASSES[rng.integers(len(STANCE_CLASSES))]
    kind = CUE_TYPES[rng.choice(len(CUE_TYPES), p=np.asarray(spec.cue_type_weights) / sum(spec.cue_type_weights))]
    length = int(rng.integers(spec.min_length, spec.max_length + 1))
    n_cues = int(rng.integers(1, spec.max_cues + 1))
    if kind == 'both':
        n_cues = max(n_cues, 2)
        kinds = ['subj', 'obj'] + [('subj', 'obj')[rng.integers(2)] for _ in range(n_cues - 2)]
    else:
        kinds = [kind] * n_cues
    tokens = [fillers[i] for i in rng.integers(len(fillers), size=length)]
    slots = rng.choice(length, size=min(len(kinds), length), replace=False)
    for slot, cue_kind in zip(slots, kinds):
        options = lexicon[(stance, cue_kind)]
        tokens[slot] = options[rng.integers(len(options))]
    return stance, tokens, int('subj' in kinds), int('obj' in kinds)


def gen_synthetic(spec: SyntheticSpec) -> SyntheticData:
    rng = np.random.default_rng(spec.seed)
    lexicon = cue_lexicon(spec)
    fillers = [f'w{k}' for k in range(spec.n_filler)]
    base = _base_words(spec)

    base_vectors = rng.normal(0.0, 1.0 / np.sqrt(spec.d_e), size=(len(base), spec.d_e))
    shift_vector = rng.normal(0.0, 1.0 / np.sqrt(spec.d_e), size=spec.d_e) * spec.shift_scale
    synonym_vectors = (
        base_vectors + shift_vector
        + rng.normal(0.0, spec.synonym_noise / np.sqrt(spec.d_e), size=base_vectors.shape)
    )

    source_rng = np.random.default_rng([spec.seed, 0])
    target_rng = np.random.default_rng([spec.seed, 1])

    source = []
    for i in range(spec.n_source):
        stance, tokens, subj, obj = _utterance(source_rng, spec, lexicon, fillers)
        source.append(Example(
            id=f's{i:06d}', topic=spec.source_topic, text=' '.join(tokens), tokens=tuple(tokens),
            domain=SOURCE, stance=stance, silver_subj=subj, silver_obj=obj,
        ))

    gold = []
    for i in range(spec.n_target):
        stance, tokens, subj, obj = _utterance(target_rng, spec, lexicon, fillers)
        swap = target_rng.random(len(tokens)) < spec.shift
        tokens = [tok + TARGET_SUFFIX if s else tok for tok, s in zip(tokens, swap)]
        gold.append(Example(
            id=f't{i:06d}', topic=spec.target_topic, text=' '.join(tokens), tokens=tuple(tokens),
            domain=TARGET, stance=stance, silver_subj=subj, silver_obj=obj,
        ))

    target_gold = Corpus(gold, domain=TARGET)
    words = base + [w + TARGET_SUFFIX for w in base]
    vectors = np.vstack([base_vectors, synonym_vectors])
    return SyntheticData(
        spec=spec,
        source=Corpus(source, domain=SOURCE),
        target=target_gold.without_stance(),
        target_gold=target_gold,
        words=words,
        vectors=vectors,
    )


SYNTHETIC_RUN_DEFAULTS = {
    'd_h': 32,
    'd_f': 32,
    'lambda1': 1.0,
    'lambda2': 10.0,
    'warmup': 50,
    'max_iterations': 1500,
    'evaluate_every': 50,
    'patience': 10,
}


def write_synthetic(data: SyntheticData, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write corpora, gold labels, silver labels, vectors and a ready-to-run ``run.cfg``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        'source': write_corpus(data.source, out / 'source.tsv'),
        'target': write_corpus(data.target, out / 'target.tsv'),
        'target_gold': write_corpus(data.target_gold, out / 'target_gold.tsv'),
        'source_silver': write_silver_labels(data.source, out / 'source_silver.tsv'),
        'target_silver': write_silver_labels(data.target, out / 'target_silver.tsv'),
        'embeddings': write_embedding_file(out / 'embeddings.txt', data.words, data.vectors),
    }
    settings = {
        'source': 'source.tsv',
        'target': 'target.tsv',
        'target_gold': 'target_gold.tsv',
        'source_silver': 'source_silver.tsv',
        'target_silver': 'target_silver.tsv',
        'embeddings': 'embeddings.txt',
        'output_dir': 'runs',
        'seed': data.spec.seed,
        **SYNTHETIC_RUN_DEFAULTS,
    }
    cfg = out / 'run.cfg'
    with open(cfg, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write('# synthetic corpora: ' + ', '.join(f'{k}={v}' for k, v in asdict(data.spec).items()) + '\n')
        for key, value in settings.items():
            fh.write(f'{key} = {value}\n')
    paths['config'] = cfg
    logger.info("Wrote synthetic corpora (%d source, %d target) to %s", len(data.source), len(data.target), out)
    return paths
