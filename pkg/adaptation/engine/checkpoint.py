"""
Checkpoint codec.

A checkpoint is a UTF-8 text manifest followed by a binary payload::

    dan-checkpoint 1
    hyper<TAB>key<TAB>value          (model hyperparameters)
    vocab<TAB>id<TAB>token           (one per vocabulary entry)
    tensor<TAB>name<TAB>shape<TAB>offset<TAB>nbytes
    end

The payload holds every tensor as little-endian float32, in manifest order.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from adaptation.engine.layers import EmbeddingTable
from adaptation.engine.model import DanModel, ModelConfig
from adaptation.exceptions import DataError

logger = logging.getLogger(__name__)

MAGIC = 'dan-checkpoint 1'
END = 'end'
PAYLOAD_DTYPE = np.dtype('<f4')
EMBEDDING_TENSOR = 'embedding.W'

_INT_FIELDS = ('d_e', 'd_h', 'd_f', 'seed')
_FLOAT_FIELDS = ('dropout',)


@dataclass
class Manifest:
    hyperparameters: Dict[str, str] = field(default_factory=OrderedDict)
    vocabulary: Dict[str, int] = field(default_factory=OrderedDict)
    tensors: List[Tuple[str, Tuple[int, ...], int, int]] = field(default_factory=list)


def save_checkpoint(model: DanModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    hyper = model.hyperparameters()
    hyper['trainable_embeddings'] = int(model.table.trainable)

    arrays = OrderedDict()
    arrays[EMBEDDING_TENSOR] = model.table.W.data
    for name, p in model.parameters().items():
        if name != EMBEDDING_TENSOR:
            arrays[name] = p.data

    lines = [MAGIC]
    lines += [f'hyper\t{key}\t{value}' for key, value in hyper.items()]
    lines += [f'vocab\t{idx}\t{tok}' for tok, idx in sorted(model.table.vocabulary.items(), key=lambda kv: kv[1])]
    offset = 0
    chunks = []
    for name, array in arrays.items():
        blob = np.ascontiguousarray(array, dtype=PAYLOAD_DTYPE).tobytes()
        shape = ','.join(str(d) for d in array.shape)
        lines.append(f'tensor\t{name}\t{shape}\t{offset}\t{len(blob)}')
        chunks.append(blob)
        offset += len(blob)
    lines.append(END)

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as fh:
        fh.write(('\n'.join(lines) + '\n').encode('utf-8'))
        for blob in chunks:
            fh.write(blob)
    logger.info("Wrote checkpoint %s (%d tensors, %d payload bytes)", path, len(chunks), offset)
    return path


def read_checkpoint(path: Union[str, Path]) -> Tuple[Manifest, Dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Checkpoint not found: {path}")
    manifest = Manifest()
    with open(path, 'rb') as fh:
        first = fh.readline().decode('utf-8').rstrip('\n')
        if first != MAGIC:
            raise DataError(f"{path}: not a checkpoint (header {first!r})")
        lineno = 1
        while True:
            raw = fh.readline()
            lineno += 1
            if not raw:
                raise DataError(f"{path}: manifest has no '{END}' marker")
            line = raw.decode('utf-8').rstrip('\n')
            if line == END:
                break
            parts = line.split('\t')
            kind = parts[0]
            if kind == 'hyper' and len(parts) == 3:
                manifest.hyperparameters[parts[1]] = parts[2]
            elif kind == 'vocab' and len(parts) == 3:
                manifest.vocabulary[parts[2]] = int(parts[1])
            elif kind == 'tensor' and len(parts) == 5:
                shape = tuple(int(d) for d in parts[2].split(',') if d)
                manifest.tensors.append((parts[1], shape, int(parts[3]), int(parts[4])))
            else:
                raise DataError(f"{path}: malformed manifest line {lineno}: {line!r}")
        payload = fh.read()

    arrays = OrderedDict()
    for name, shape, offset, nbytes in manifest.tensors:
        count = int(np.prod(shape)) if shape else 1
        if count * PAYLOAD_DTYPE.itemsize != nbytes or offset + nbytes > len(payload):
            raise DataError(f"{path}: tensor '{name}' does not fit the payload")
        arrays[name] = np.frombuffer(payload, dtype=PAYLOAD_DTYPE, count=count, offset=offset).reshape(shape)
    return manifest, arrays


def load_checkpoint(path: Union[str, Path]) -> DanModel:
    manifest, arrays = read_checkpoint(path)
    hyper = manifest.hyperparameters
    if EMBEDDING_TENSOR not in arrays:
        raise DataError(f"{path}: checkpoint has no embedding table")
    kwargs = {}
    for key in ModelConfig.__dataclass_fields__:
        if key not in hyper:
            continue
        value = hyper[key]
        if key in _INT_FIELDS:
            value = int(value)
        elif key in _FLOAT_FIELDS:
            value = float(value)
        kwargs[key] = value
    trainable = bool(int(hyper.get('trainable_embeddings', '0')))
    table = EmbeddingTable(arrays[EMBEDDING_TENSOR], manifest.vocabulary, trainable=trainable)
    model = DanModel(ModelConfig(**kwargs), table)
    missing = [name for name in model.parameters() if name not in arrays]
    if missing:
        raise DataError(f"{path}: checkpoint lacks tensors {missing[:3]}")
    model.load_state_dict({name: arrays[name] for name in model.parameters()})
    return model
