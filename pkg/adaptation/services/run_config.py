"""
``key = value`` run-configuration files.

Values are validated by ``RunConfigSerializer``; command-line overrides are
applied on top of the file before validation, so they take precedence.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Union

from rest_framework import serializers

from adaptation.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def parse_config_text(text: str, origin: str = '<config>') -> Dict[str, str]:
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigurationError(f"{origin}:{lineno}: expected 'key = value'")
        if key in values:
            raise ConfigurationError(f"{origin}:{lineno}: duplicate key '{key}'")
        values[key] = value
    return values


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    return parse_config_text(path.read_text(encoding='utf-8'), origin=str(path))


def parse_overrides(assignments: Optional[Iterable[str]]) -> Dict[str, str]:
    """``['key=value', ...]`` from repeated ``--set`` flags."""
    values: Dict[str, str] = {}
    for item in assignments or ():
        key, sep, value = item.partition('=')
        if not sep or not key.strip():
            raise ConfigurationError(f"Override '{item}' is not of the form key=value")
        values[key.strip()] = value.strip()
    return values


def format_validation_error(detail) -> str:
    if isinstance(detail, Mapping):
        parts = []
        for key, messages in detail.items():
            parts.append(f"{key}: {format_validation_error(messages)}")
        return '; '.join(parts)
    if isinstance(detail, (list, tuple)):
        return ' '.join(format_validation_error(m) for m in detail)
    return str(detail)


def validate_run_config(values: Mapping[str, object], base_dir: Optional[Union[str, Path]] = None) -> Dict[str, object]:
    # Deferred: the serializer module imports the ORM models.
    from adaptation.serializers import RunConfigSerializer

    serializer = RunConfigSerializer(data=dict(values), context={'base_dir': base_dir})
    try:
        serializer.is_valid(raise_exception=True)
    except serializers.ValidationError as exc:
        raise ConfigurationError(f"Invalid run configuration: {format_validation_error(exc.detail)}") from None
    return dict(serializer.validated_data)


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Mapping[str, object]] = None) -> Dict[str, object]:
    """File values, then overrides; relative paths resolve against the file's directory."""
    values: Dict[str, object] = {}
    base_dir = Path.cwd()
    if path is not None:
        values.update(read_config_file(path))
        base_dir = Path(path).resolve().parent
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    config = validate_run_config(values, base_dir=base_dir)
    logger.debug("Run configuration: %s", config)
    return config
