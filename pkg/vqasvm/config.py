"""Optional per-command configuration files.

Keys mirror the long flag names of the chosen command (``max-iter`` or
``max_iter``). Files are read as YAML when PyYAML is available, then as
JSON, and finally as ``key = value`` lines. Flags given on the command line
always win over file values.
"""

from __future__ import annotations

import argparse
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

try:  # pragma: no cover - optional dependency
    import yaml
except ImportError:  # pragma: no cover - fallback when dependency is absent
    yaml = None  # type: ignore[assignment]

logger = logging.getLogger(__name__)

THREADS_ENV = "VQASVM_THREADS"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    """Raised for unreadable config files or unknown keys."""


def _parse_key_values(text: str, source: Path) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Linha {line_number} de {source.name} não segue o formato chave = valor")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def read_config_file(path: Path) -> Dict[str, Any]:
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Não foi possível ler {source}: {exc}") from exc
    if not text.strip():
        return {}

    data: Any = None
    if yaml is not None:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError:  # pragma: no cover - depende da lib externa
            data = None
    if data is None or isinstance(data, str):
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            data = _parse_key_values(text, source)
    if not isinstance(data, dict):
        raise ConfigError("O arquivo de configuração deve ser um mapeamento chave → valor")
    return {str(key): value for key, value in data.items()}


@dataclass
class RunConfig:
    """Values loaded for one command, keyed by argparse destination."""

    command: str
    values: Dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None

    @classmethod
    def from_file(cls, path: Path, command: str, parser: argparse.ArgumentParser) -> "RunConfig":
        lookup: Dict[str, Any] = {}
        for action in parser._actions:  # noqa: SLF001 - argparse exposes no public listing
            if action.dest in ("help", "config"):
                continue
            lookup.setdefault(action.dest, (action, False))
            for option in action.option_strings:
                lookup[option.lstrip("-").replace("-", "_")] = (action, True)
        values: Dict[str, Any] = {}
        for key, raw in read_config_file(path).items():
            entry = lookup.get(key.lstrip("-").replace("-", "_"))
            if entry is None:
                raise ConfigError(f"Chave desconhecida para '{command}': {key}")
            action, as_flag = entry
            values[action.dest] = _coerce(action, raw, key, as_flag)
        return cls(command, values, Path(path))

    def apply(self, parser: argparse.ArgumentParser) -> None:
        """Install file values as parser defaults so explicit flags still take precedence."""

        if self.values:
            parser.set_defaults(**self.values)
            logger.debug("Configuração de %s aplicada: %s", self.source, sorted(self.values))


def _coerce(action: argparse.Action, raw: Any, key: str, as_flag: bool = True) -> Any:
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):  # noqa: SLF001
        if isinstance(raw, bool):
            flag = raw
        elif str(raw).strip().lower() in _TRUE:
            flag = True
        elif str(raw).strip().lower() in _FALSE:
            flag = False
        else:
            raise ConfigError(f"Valor booleano inválido para {key}: {raw!r}")
        # "no-x = true" means x is off; "x = false" names the destination directly
        if as_flag and isinstance(action, argparse._StoreFalseAction):  # noqa: SLF001
            return not flag
        return flag
    if action.nargs in ("+", "*"):
        items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
        return [_coerce_scalar(action, str(item).strip(), key) for item in items]
    if isinstance(raw, (list, tuple)):
        # list-typed flags take a comma-separated string
        raw = ",".join(str(item) for item in raw)
    return _coerce_scalar(action, raw, key)


def _coerce_scalar(action: argparse.Action, raw: Any, key: str) -> Any:
    value = raw
    if action.type is not None and not isinstance(raw, bool):
        try:
            value = action.type(str(raw))
        except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"Valor inválido para {key}: {raw!r}") from exc
    if action.choices is not None and value not in action.choices:
        raise ConfigError(f"Valor inválido para {key}: {raw!r}")
    return value


__all__ = ["ConfigError", "RunConfig", "THREADS_ENV", "read_config_file"]
