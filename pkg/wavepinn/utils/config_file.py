"""
Key=value run configuration files.

Files use dotenv syntax (one `key=value` per line, `#` comments, optional quotes) and are
read with python-dotenv. Lists are comma separated; cut planes use `axis:value;axis:value`.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Type, TypeVar

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError

from wavepinn.errors import ConfigError, FileError
from wavepinn.schemas import CutPlane, RunConfig

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


def read_key_values(path) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise FileError(path, "config file not found")
    try:
        values = dotenv_values(path, interpolate=False)
    except (OSError, UnicodeDecodeError) as e:
        raise FileError(path, f"cannot read config file ({e})")
    cleaned = {}
    for key, value in values.items():
        if value is None:
            raise ConfigError(f"{path}: line for key '{key}' has no '=' value")
        cleaned[key.strip()] = value.strip()
    return cleaned


def parse_overrides(items: Optional[Iterable[str]]) -> Dict[str, str]:
    """`--set key=value` items from the command line."""
    overrides = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override '{item}' is not of the form key=value")
        overrides[key.strip()] = value.strip()
    return overrides


def validation_to_config_error(error: ValidationError, source: str = "config") -> ConfigError:
    """Name the first offending key; unknown keys get their own wording."""
    first = error.errors()[0]
    key = ".".join(str(part) for part in first.get("loc", ())) or "<root>"
    if first.get("type") == "extra_forbidden":
        return ConfigError(f"{source}: unknown config key '{key}'")
    return ConfigError(f"{source}: invalid value for '{key}': {first.get('msg')}")


def build_model(model: Type[M], values: Mapping[str, Any], source: str = "config") -> M:
    try:
        return model.model_validate(dict(values))
    except ValidationError as e:
        raise validation_to_config_error(e, source)


def load_run_config(path=None, overrides: Optional[Mapping[str, str]] = None) -> RunConfig:
    values: Dict[str, Any] = {}
    source = "config"
    if path is not None:
        values.update(read_key_values(path))
        source = str(path)
    if overrides:
        values.update(overrides)
    config = build_model(RunConfig, values, source)
    logger.debug(f"Loaded run config from {source} ({len(values)} keys)")
    return config


# ==================== Dumping ====================

def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, CutPlane):
        return f"{value.axis}:{value.value!r}"
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], CutPlane):
            return ";".join(_format_value(v) for v in value)
        return ",".join(_format_value(v) for v in value)
    return str(value)


def _quote(text: str) -> str:
    if any(ch in text for ch in " #'\"=") or text != text.strip():
        return "'" + text + "'"
    return text


def dump_key_values(values: Mapping[str, Any]) -> str:
    lines = []
    for key, value in values.items():
        if value is None:
            continue
        lines.append(f"{key}={_quote(_format_value(value))}")
    return "\n".join(lines) + "\n"


def dump_run_config(config: RunConfig, path) -> Path:
    path = Path(path)
    text = "# effective configuration (problem defaults resolved)\n" + dump_key_values(
        {name: getattr(config, name) for name in type(config).model_fields}
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise FileError(path, f"cannot write config ({e})")
    return path
