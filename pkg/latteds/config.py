"""
Process settings and experiment configuration files.

Settings come from ``LATTEDS_*`` environment variables, optionally loaded
from the ``.env`` file at the repository root. Experiment files are flat
``section.key = value`` lines parsed into the records of :mod:`latteds.models`.
"""
import logging.config
import os
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigError
from .models import CoarseningConfig, RunConfig

# Load .env file for environment variables
dotenv_path = os.path.join(os.path.dirname(__file__), '..', '.env')
load_dotenv(dotenv_path=dotenv_path)

LOGGING_INI = os.path.join(os.path.dirname(__file__), "logging.ini")


class Settings(BaseSettings):
    """
    Process-wide settings.

    Attributes:
        threads (int): Parallelism cap of ensemble runs, ``LATTEDS_THREADS``.
        output_dir (str): Default output directory, ``LATTEDS_OUTPUT_DIR``.
        log_level (str): Level of the ``latteds`` logger, ``LATTEDS_LOG_LEVEL``.
    """
    model_config = SettingsConfigDict(env_prefix="LATTEDS_")

    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    output_dir: str = "runs"
    log_level: str = "INFO"


@lru_cache
def get_settings() -> Settings:
    return Settings()


def setup_logging(level: Optional[str] = None) -> None:
    """Configure logging from ``logging.ini`` and apply the requested level."""
    logging.config.fileConfig(LOGGING_INI, disable_existing_loggers=False)
    logging.getLogger("latteds").setLevel((level or get_settings().log_level).upper())


def parse_flat(text: str) -> Dict[str, str]:
    """
    Split ``section.key = value`` lines into a dict.

    Blank lines and lines starting with ``#`` are ignored.

    Args:
        text (str): File contents.

    Returns:
        Dict[str, str]: Raw values by dotted key, in file order.

    Raises:
        ConfigError: On a line without ``=``, an empty key or a repeated key.
    """
    entries: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {number}: expected 'section.key = value', got {raw!r}")
        if key in entries:
            raise ConfigError(f"line {number}: duplicate key {key}", key=key)
        entries[key] = value.strip()
    return entries


def nest(entries: Dict[str, str]) -> Dict[str, Union[str, Dict[str, str]]]:
    """Group dotted keys by section; keys without a dot stay at the top level."""
    nested: Dict[str, Union[str, Dict[str, str]]] = {}
    for key, value in entries.items():
        section, dot, name = key.partition(".")
        if not dot:
            nested[key] = value
            continue
        if "." in name or not name:
            raise ConfigError(f"malformed key {key}", key=key)
        group = nested.setdefault(section, {})
        if not isinstance(group, dict):
            raise ConfigError(f"key {section} is used both as a value and a section", key=key)
        group[name] = value
    return nested


def _config_error(error: ValidationError, aliases: Dict[str, str], prefix: str = "") -> ConfigError:
    first = error.errors()[0]
    loc = [str(part) for part in first["loc"]]
    head = [aliases.get(loc[0], prefix + loc[0])] if loc else []
    key = ".".join(head + loc[1:]) or None
    message = first["msg"].removeprefix("Value error, ")
    if first["type"] == "extra_forbidden":
        return ConfigError(f"unknown key {key}", key=key)
    if first["type"] == "missing":
        return ConfigError(f"missing required key {key}", key=key)
    if first["type"] == "value_error" and len(loc) <= 1:
        return ConfigError(message, key=key)
    return ConfigError(f"invalid value for {key}: {message}", key=key)


def _read(source: Union[str, Path]) -> str:
    path = Path(source)
    try:
        return path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"cannot read configuration {path}: {error.strerror}")


def parse_config_text(text: str) -> RunConfig:
    nested = nest(parse_flat(text))
    try:
        return RunConfig.model_validate(nested)
    except ValidationError as error:
        raise _config_error(error, {})


def parse_config(path: Union[str, Path]) -> RunConfig:
    """
    Read and validate a run configuration file.

    Args:
        path (str | Path): UTF-8 text file of ``section.key = value`` lines.

    Returns:
        RunConfig: The validated configuration with defaults filled in.

    Raises:
        ConfigError: Naming the unknown key, the invalid key or the violated rule.
    """
    return parse_config_text(_read(path))


def parse_coarsening_text(text: str) -> CoarseningConfig:
    nested = nest(parse_flat(text))
    unknown = set(nested) - {"coarsening", "seed", "output"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key}", key=key)
    values = dict(nested.get("coarsening", {}))
    if "seed" in nested:
        values["seed"] = nested["seed"]
    output = nested.get("output", {})
    extra = set(output) - {"dir"}
    if extra:
        key = f"output.{sorted(extra)[0]}"
        raise ConfigError(f"unknown key {key}", key=key)
    if "dir" in output:
        values["output_dir"] = output["dir"]
    try:
        return CoarseningConfig.model_validate(values)
    except ValidationError as error:
        raise _config_error(
            error, {"seed": "seed", "output_dir": "output.dir"}, prefix="coarsening."
        ) from None


def parse_coarsening_config(path: Union[str, Path]) -> CoarseningConfig:
    """Read and validate a coarsening configuration file (``coarsening.*`` keys)."""
    return parse_coarsening_text(_read(path))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _flatten(data: dict, prefix: str = "") -> Iterable[Tuple[str, str]]:
    for key, value in data.items():
        if value is None:
            continue
        if isinstance(value, dict):
            yield from _flatten(value, f"{prefix}{key}.")
        else:
            yield f"{prefix}{key}", _format(value)


def echo_config(config: Union[RunConfig, CoarseningConfig]) -> str:
    """
    The configuration in the flat file format with every default spelled out.

    Parsing the echo yields a record equal to ``config``.
    """
    if isinstance(config, CoarseningConfig):
        data = config.model_dump()
        seed, output_dir = data.pop("seed"), data.pop("output_dir")
        lines: List[Tuple[str, str]] = list(_flatten({"coarsening": data}))
        lines.append(("seed", _format(seed)))
        if output_dir is not None:
            lines.append(("output.dir", output_dir))
    else:
        lines = list(_flatten(config.model_dump(by_alias=True)))
    return "".join(f"{key} = {value}\n" for key, value in lines)
