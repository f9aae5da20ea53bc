"""
Flat key=value configuration files

Files use the dotenv syntax: one `key=value` per line, `#` comments,
optional quoting. Values stay strings here; typing and range checks belong
to the serializer that consumes them.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional

from dotenv import dotenv_values

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def read_config_file(path) -> Dict[str, str]:
    """
    Parse a config file into an ordered dict of raw strings.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}", path=str(path))

    values = dotenv_values(path, interpolate=False)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigurationError(
            f"Config key without value: {missing[0]}", key=missing[0], path=str(path)
        )
    logger.debug(f"Read {len(values)} config keys from {path}")
    return dict(values)


def format_config_value(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple)):
        return ','.join(format_config_value(item) for item in value)
    return str(value)


def write_config_file(path, values: Dict, order: Optional[Iterable[str]] = None, header: str = '') -> Path:
    """
    Write `values` as key=value lines, keys in `order` first.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    keys = list(order or [])
    keys += [key for key in values if key not in keys]

    lines = [f"# {line}" for line in header.splitlines()] if header else []
    for key in keys:
        if key in values and values[key] is not None:
            lines.append(f"{key}={format_config_value(values[key])}")

    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path
