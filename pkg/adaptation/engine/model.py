"""
The dual-view adaptation network: per-view encoders, silver-label auxiliary
heads, per-view domain examiners, the fusion gate and the stance head.

The same class covers every baseline in the variant matrix. ``ViewMode``
decides which encoders and auxiliary heads exist, ``AlignerKind`` decides
whether examiners exist and whether they output a 2-way probability (H) or
an unbounded critic score (W).
"""
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from adaptation.engine.layers import (
    BiLSTMEncoder, DropoutSpec, EmbeddingTable, FeedForward, ffn_forward, uniform_init,
)
from adaptation.engine.tensor import (
    Tensor, as_tensor, concat, matmul, no_grad, parameter, reshape, sigmoid, take, transpose,
)
from adaptation.engine.variants import AlignerKind, ViewMode, describe_variant
from adaptation.exceptions import ConfigurationError, ShapeError


STANCE_CLASSES = ('favour', 'against', 'neutral')
HIDDEN_SIZE_INTERVAL = (100, 300)


@dataclass
class ModelConfig:
    d_e: int
    d_h: int = 128
    d_f: int = 128
    view_mode: ViewMode = ViewMode.DUAL
    aligner_kind: AlignerKind = AlignerKind.H_ADVERSARIAL
    pooling: str = 'mean'
    dropout: float = 0.1
    seed: int = 13

    def __post_init__(self):
        self.view_mode = ViewMode.parse(self.view_mode)
        self.aligner_kind = AlignerKind.parse(self.aligner_kind)
        for name in ('d_e', 'd_h', 'd_f'):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data['view_mode'] = self.view_mode.value
        data['aligner_kind'] = self.aligner_kind.value
        return data


def sample_hidden_sizes(rng: np.random.Generator,
                        interval: Tuple[int, int] = HIDDEN_SIZE_INTERVAL) -> Tuple[int, int]:
    """Draw (d_h, d_f) uniformly from the closed integer interval."""
    low, high = interval
    if low < 1 or high < low:
        raise ConfigurationError(f"Invalid hidden-size interval {interval}")
    d_h, d_f = rng.integers(low, high + 1, size=2)
    return int(d_h), int(d_f)


class DanModel:
    def __init__(self, config: ModelConfig, table: EmbeddingTable):
        if table.d_e != config.d_e:
            raise ShapeError(f"Model expects d_e={config.d_e}, embedding table has {table.d_e}")
        self.config = config
        self.table = table
        self.dropout = DropoutSpec(rate=config.dropout)
        rng = np.random.default_rng(config.seed)
        d_h, d_f = config.d_h, config.d_f

        self.encoders: Dict[str, BiLSTMEncoder] = OrderedDict(
            (view, BiLSTMEncoder(config.d_e, d_h, rng, f'F_{view}', pooling=config.pooling))
            for view in config.view_mode.views
        )
        self.stance_head = FeedForward(d_h, d_f, len(STANCE_CLASSES), rng, 'C_stance')
        self.auxiliary_heads: Dict[str, FeedForward] = OrderedDict(
            (view, FeedForward(d_h, d_f, 2, rng, f'C_{view}'))
            for view in config.view_mode.auxiliary_views
        )
        self.examiners: Dict[str, FeedForward] = OrderedDict()
        if config.aligner_kind.adversarial:
            width = 2 if config.aligner_kind is AlignerKind.H_ADVERSARIAL else 1
            for view in config.view_mode.views:
                self.examiners[view] = FeedForward(d_h, d_f, width, rng, f'D_{view}')
        self.W_u: Optional[Tensor] = None
        self.b_u: Optional[Tensor] = None
        if config.view_mode.fused:
            self.W_u = parameter(uniform_init(rng, d_h, 2 * d_h), name='U.W_u')
            self.b_u = parameter(np.zeros(d_h), name='U.b_u')

    # ---------- properties ----------

    @property
    def view_mode(self) -> ViewMode:
        return self.config.view_mode

    @property
    def aligner_kind(self) -> AlignerKind:
        return self.config.aligner_kind

    @property
    def d_h(self) -> int:
        return self.config.d_h

    @property
    def variant(self) -> str:
        return describe_variant(self.view_mode, self.aligner_kind)

    # ---------- parameter groups ----------

    def examiner_parameters(self) -> Dict[str, Tensor]:
        params = OrderedDict()
        for head in self.examiners.values():
            params.update(head.parameters())
        return params

    def main_parameters(self) -> Dict[str, Tensor]:
        """Encoders, gate and classifier heads; the embedding table when trainable."""
        params = OrderedDict()
        if self.table.trainable:
            params[self.table.W.name] = self.table.W
        for encoder in self.encoders.values():
            params.update(encoder.parameters())
        if self.W_u is not None:
            params[self.W_u.name] = self.W_u
            params[self.b_u.name] = self.b_u
        params.update(self.stance_head.parameters())
        for head in self.auxiliary_heads.values():
            params.update(head.parameters())
        return params

    def parameters(self) -> Dict[str, Tensor]:
        params = self.main_parameters()
        params.update(self.examiner_parameters())
        return params

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    def state_dict(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, p.data.copy()) for name, p in self.parameters().items())

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise ConfigurationError(
                f"State does not match model: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError(f"{name}: stored shape {value.shape} differs from {p.shape}")
            p.data = value.astype(p.data.dtype, copy=True)

    # ---------- forward ----------

    def forward_views(self, batch: Sequence[Sequence[int]],
                      rng: Optional[np.random.Generator] = None) -> Dict[str, Tensor]:
        """(B, d_h) features per view; dropout is active only when ``rng`` is given."""
        return OrderedDict(
            (view, encoder.encode_batch(batch, self.table, self.dropout, rng))
            for view, encoder in self.encoders.items()
        )

    def encode_views(self, tokens: Sequence[int]) -> Tuple[Tensor, Tensor]:
        """(f_subj, f_obj) for one utterance."""
        if self.view_mode is not ViewMode.DUAL:
            raise ConfigurationError(f"encode_views needs both views, model is '{self.view_mode.value}'")
        feats = self.forward_views([tokens])
        return reshape(feats['subj'], (self.d_h,)), reshape(feats['obj'], (self.d_h,))

    def fuse(self, f_subj: Tensor, f_obj: Tensor) -> Tuple[Tensor, Tensor]:
        """Gate g = sigmoid(W_u [f_subj; f_obj] + b_u); f_dual = g * f_subj + (1 - g) * f_obj."""
        if self.W_u is None:
            raise ConfigurationError(f"Model '{self.variant}' has no fusion gate")
        f_subj, f_obj = as_tensor(f_subj), as_tensor(f_obj)
        if f_subj.shape != f_obj.shape or f_subj.shape[-1] != self.d_h:
            raise ShapeError(f"fuse: view features {f_subj.shape} and {f_obj.shape}, expected width {self.d_h}")
        stacked = concat([f_subj, f_obj], axis=-1)
        gate = sigmoid(matmul(stacked, transpose(self.W_u)) + self.b_u)
        return gate, gate * f_subj + (1.0 - gate) * f_obj

    def stance_feature(self, views: Dict[str, Tensor]) -> Tensor:
        if self.view_mode.fused:
            return self.fuse(views['subj'], views['obj'])[1]
        (only,) = views.values()
        return only

    def stance_probabilities(self, views: Dict[str, Tensor]) -> Tensor:
        return ffn_forward(self.stance_feature(views), self.stance_head, 'probabilities')

    def predict_stance(self, tokens: Sequence[int]) -> Tensor:
        """3-way probabilities over favour, against, neutral."""
        return reshape(self.predict_batch([tokens]), (len(STANCE_CLASSES),))

    def predict_batch(self, batch: Sequence[Sequence[int]]) -> Tensor:
        with no_grad():
            return self.stance_probabilities(self.forward_views(batch))

    def predict_labels(self, batch: Sequence[Sequence[int]], chunk: int = 64) -> List[str]:
        """Argmax stance labels; ties go to the lowest class index."""
        labels: List[str] = []
        for start in range(0, len(batch), chunk):
            probs = self.predict_batch(batch[start:start + chunk]).data
            labels.extend(STANCE_CLASSES[i] for i in np.argmax(probs, axis=1))
        return labels

    def auxiliary_predict(self, feature: Tensor, view: str) -> Tensor:
        """Probability that the utterance carries content of ``view`` (column 1) or not (column 0)."""
        head = self.auxiliary_heads.get(view)
        if head is None:
            raise ConfigurationError(f"Model '{self.variant}' has no auxiliary head for view '{view}'")
        return ffn_forward(feature, head, 'probabilities')

    def examiner_output(self, feature: Tensor, view: str) -> Tensor:
        """Raw examiner output: (B, 2) domain probabilities (H) or (B,) critic values (W)."""
        head = self.examiners.get(view)
        if head is None:
            raise ConfigurationError(
                f"Model '{self.variant}' has no domain examiner for view '{view}'")
        if self.aligner_kind is AlignerKind.WASSERSTEIN:
            return ffn_forward(feature, head, 'scalar')
        return ffn_forward(feature, head, 'probabilities')

    def examine(self, feature: Tensor, view: str) -> Tensor:
        """Source probability (H) or critic score (W) per example."""
        out = self.examiner_output(feature, view)
        if self.aligner_kind is AlignerKind.WASSERSTEIN:
            return out
        source = take(out, 0, 1, axis=-1)
        return reshape(source, source.shape[:-1])

    def hyperparameters(self) -> Dict[str, object]:
        data = self.config.to_dict()
        data['vocab_size'] = self.table.V
        data['variant'] = self.variant
        return data

    def __repr__(self) -> str:
        return f"DanModel(variant={self.variant}, d_h={self.d_h}, params={self.parameter_count()})"
