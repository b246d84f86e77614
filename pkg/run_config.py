"""Loading and validating per-subcommand JSON config files."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import config

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Malformed or invalid config file; `line` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[Path] = None):
        self.line = line
        self.path = path
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(f"{where}{message}")


def _line_of(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return number
    return None


def _type_ok(default: Any, value: Any) -> bool:
    if default is None:
        return value is None or isinstance(value, list)
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, list)
    return isinstance(value, type(default))


def schema(subcommand: str) -> Dict[str, Any]:
    try:
        return config.SUBCOMMAND_DEFAULTS[subcommand]
    except KeyError:
        raise ConfigError(f"unknown subcommand '{subcommand}'")


def load_config_file(subcommand: str, path: Path) -> Dict[str, Any]:
    """
    Read a JSON config file and check it against the subcommand's defaults.

    Every key must be known to the subcommand and carry a value of the
    default's type ('seed' is accepted everywhere).

    Raises:
        ConfigError: unreadable file, JSON syntax error, unknown key or bad type
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", path=path)

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", line=e.lineno, path=path)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", line=1, path=path)

    defaults = schema(subcommand)
    for key, value in data.items():
        if key == 'seed':
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigError("'seed' must be a non-negative integer",
                                  line=_line_of(text, key), path=path)
            continue
        if key not in defaults:
            raise ConfigError(f"unknown key '{key}' for {subcommand}",
                              line=_line_of(text, key), path=path)
        if not _type_ok(defaults[key], value):
            expected = type(defaults[key]).__name__ if defaults[key] is not None else 'list or null'
            raise ConfigError(f"'{key}' must be {expected}, got {type(value).__name__}",
                              line=_line_of(text, key), path=path)

    logger.debug(f"Loaded {len(data)} keys from {path}")
    return data


def resolve(subcommand: str, file_values: Optional[Dict[str, Any]] = None,
            overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Merge defaults < file values < flag overrides (None overrides are ignored)."""
    resolved = {**schema(subcommand), 'seed': config.DEFAULT_SEED}
    resolved.update(file_values or {})
    resolved.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return resolved
