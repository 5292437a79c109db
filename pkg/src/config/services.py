import datetime as dt
import pathlib
import sys
import typing as t

from loguru import logger
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
import yaml

from src.config.constants import app


class Settings(BaseSettings):
    """Parses the configuration settings for the application from the environment, the `.env` file and an optional
    YAML config file."""

    model_config = SettingsConfigDict(
        env_prefix="LOGSTAMP_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    ledger_path: pathlib.Path | None = None
    authorities: list[str] = Field(default_factory=lambda: list(app.DEFAULT_AUTHORITIES), min_length=1)
    genesis_time: dt.datetime = app.DEFAULT_GENESIS_TIME
    seal_interval: dt.timedelta = app.DEFAULT_SEAL_INTERVAL
    ledger_latency: dt.timedelta = dt.timedelta(0)
    replica_count: int = Field(app.DEFAULT_REPLICA_COUNT, ge=1)

    chunk_size: int = Field(app.DEFAULT_CHUNK_SIZE, ge=1)
    max_wait: dt.timedelta = app.DEFAULT_MAX_WAIT
    poll_interval: dt.timedelta = app.DEFAULT_POLL_INTERVAL
    max_pending_groups: int = Field(app.DEFAULT_MAX_PENDING_GROUPS, ge=1)
    strict_bytes: bool = False

    archive_dir: pathlib.Path | None = None
    key_file: pathlib.Path | None = None
    index_dir: pathlib.Path | None = None

    log_level: str = "INFO"
    log_to_file: bool = False
    logs_directory: pathlib.Path | None = None

    @field_validator("max_wait", "poll_interval")
    def check_positive_duration(cls, value: dt.timedelta) -> dt.timedelta:
        """Durations driving the grouping window and tail loop must be positive."""

        if value <= dt.timedelta(0):
            raise ValueError("duration must be positive")

        return value


def load_config_file(config_file: pathlib.Path) -> dict[str, t.Any]:
    """Reads a YAML config file whose keys mirror the `Settings` fields."""

    try:
        with config_file.open("r", encoding="utf-8") as file_:
            data = yaml.safe_load(file_)
    except (OSError, yaml.YAMLError) as exc:
        logger.error(f"error reading config file {config_file}: {exc}")
        raise

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"config file {config_file} must hold a mapping")

    return data


def generate_settings_config(
    env_location: str | None = None, config_file: pathlib.Path | None = None, **overrides: t.Any
) -> Settings:
    """Calls the Settings class' instance, which parses and prepares env vars for use throughout the application.\n
    `env_location` overwrites the default env file location to read from, values from `config_file` take precedence
    over the environment and `overrides` (CLI flags) take precedence over both."""

    values: dict[str, t.Any] = {}
    if config_file is not None:
        values.update(load_config_file(config_file))

    values.update({key: value for key, value in overrides.items() if value is not None})

    if env_location is not None:
        settings = Settings(_env_file=env_location, **values)  # type: ignore
    else:
        settings = Settings(**values)

    return settings


def initialize_logger(
    format: str,
    path: pathlib.Path | None = None,
    filename: str | t.TextIO = sys.stderr,
    rotation: str | int = "00:00",
    level: str = "INFO",
) -> None:
    """Initializes the logger with the given configuration parameters.\n
    Uses `rotation` and `path` only when supplying a log file name."""

    configuration: dict[str, t.Any] = {"format": format, "level": level, "colorize": False}

    if isinstance(filename, str):
        if path is not None:
            path.mkdir(parents=True, exist_ok=True)
            file_directory = path.joinpath(filename)
        else:
            file_directory = pathlib.Path(filename)

        configuration["sink"] = file_directory
        configuration["rotation"] = rotation
        configuration["enqueue"] = True
    else:
        configuration["sink"] = filename

    logger.remove()
    logger.add(**configuration)
