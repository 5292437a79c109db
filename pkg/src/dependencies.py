import pathlib

import typer

from src.config.services import Settings
from src.schemas.archive import ArchiveKey
from src.services.archive import ArchiveStore, load_key
from src.services.ledger import Ledger
from src.services.search import SearchIndex


def get_settings(ctx: typer.Context) -> Settings:
    """Returns the settings the root callback stored on the context."""

    settings = ctx.find_object(Settings)
    return settings if settings is not None else Settings()


def override_settings(ctx: typer.Context, **values) -> Settings:
    """Returns the shared settings with every command option that was given applied on top."""

    return get_settings(ctx).model_copy(update={key: value for key, value in values.items() if value is not None})


def open_ledger(settings: Settings, read_only: bool = False) -> Ledger:
    """Opens the configured ledger journal, or an in-memory ledger when no path is configured."""

    return Ledger(
        settings.ledger_path,
        authorities=settings.authorities,
        genesis_time=settings.genesis_time,
        latency=settings.ledger_latency,
        read_only=read_only,
    )


def require_path(value: pathlib.Path | None, option: str) -> pathlib.Path:
    if value is None:
        raise typer.BadParameter(f"{option} is required")

    return value


def open_archive(settings: Settings) -> ArchiveStore:
    return ArchiveStore(require_path(settings.archive_dir, "--archive"))


def load_archive_key(settings: Settings) -> ArchiveKey:
    return load_key(require_path(settings.key_file, "--key-file"))


def open_index(settings: Settings) -> SearchIndex:
    return SearchIndex(require_path(settings.index_dir, "--index"))
