from enum import Enum
from typing import Tuple, Union

from adaptation.exceptions import ConfigurationError


class ViewMode(str, Enum):
    SINGLE = 'single'
    DUAL = 'dual'
    DUAL_SUBJ_ONLY = 'dual-subj-only'
    DUAL_OBJ_ONLY = 'dual-obj-only'

    @classmethod
    def parse(cls, value: Union[str, 'ViewMode']) -> 'ViewMode':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace('_', '-'))
        except ValueError:
            choices = ', '.join(m.value for m in cls)
            raise ConfigurationError(f"Unknown view mode '{value}' (expected one of {choices})") from None

    @property
    def views(self) -> Tuple[str, ...]:
        """Encoder keys present in this mode."""
        return {
            ViewMode.SINGLE: ('main',),
            ViewMode.DUAL: ('subj', 'obj'),
            ViewMode.DUAL_SUBJ_ONLY: ('subj',),
            ViewMode.DUAL_OBJ_ONLY: ('obj',),
        }[self]

    @property
    def auxiliary_views(self) -> Tuple[str, ...]:
        """Views that carry a silver-label auxiliary head."""
        return () if self is ViewMode.SINGLE else self.views

    @property
    def fused(self) -> bool:
        return self is ViewMode.DUAL


class AlignerKind(str, Enum):
    NONE = 'none'
    CORAL = 'coral'
    H_ADVERSARIAL = 'h-adversarial'
    WASSERSTEIN = 'wasserstein'

    @classmethod
    def parse(cls, value: Union[str, 'AlignerKind']) -> 'AlignerKind':
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace('_', '-')
        key = ALIGNER_ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ', '.join(m.value for m in cls)
            raise ConfigurationError(f"Unknown aligner '{value}' (expected one of {choices})") from None

    @property
    def adversarial(self) -> bool:
        return self in (AlignerKind.H_ADVERSARIAL, AlignerKind.WASSERSTEIN)


ALIGNER_ALIASES = {
    'so': 'none',
    'dann': 'h-adversarial',
    'h': 'h-adversarial',
    'wdgrl': 'wasserstein',
    'w': 'wasserstein',
}

_BASELINE_NAMES = {
    AlignerKind.NONE: 'SO',
    AlignerKind.CORAL: 'CORAL',
    AlignerKind.H_ADVERSARIAL: 'DANN',
    AlignerKind.WASSERSTEIN: 'WDGRL',
}


def describe_variant(view_mode, aligner_kind) -> str:
    """Experiment-table name of a configuration, e.g. ``DANN`` or ``D-WDGRL``."""
    view_mode = ViewMode.parse(view_mode)
    base = _BASELINE_NAMES[AlignerKind.parse(aligner_kind)]
    if view_mode is ViewMode.SINGLE:
        return base
    if view_mode is ViewMode.DUAL:
        return f'D-{base}'
    suffix = 'SUBJ' if view_mode is ViewMode.DUAL_SUBJ_ONLY else 'OBJ'
    return f'D-{base}-{suffix}'
