import datetime as dt
import pathlib
from typing import Annotated, Any, Optional

import orjson
from pydantic import BaseModel
import typer

from src.config.exceptions import ParseError
from src.services.logs import extract_timestamp
from src.utils.config import parse_duration


LedgerOption = Annotated[
    Optional[pathlib.Path], typer.Option("--ledger", help="Ledger journal file; overrides the global --ledger.")
]


def serialize_line(data: BaseModel | dict[str, Any]) -> bytes:
    """Serializes a model or a mapping into one JSON line, the structured text format of every command's output."""

    if isinstance(data, BaseModel):
        return orjson.dumps(data.model_dump(mode="json"))

    return orjson.dumps(data)


def echo_line(data: BaseModel | dict[str, Any]) -> None:
    typer.echo(serialize_line(data).decode("utf-8"))


def duration_option(value: str | None) -> dt.timedelta | None:
    """Typer callback turning `500ms`-style option values into timedeltas."""

    if value is None:
        return None

    try:
        return parse_duration(value)
    except ValueError as exc:
        raise typer.BadParameter(str(exc))


def timestamp_option(value: str | None) -> int | None:
    """Typer callback turning an RFC-3339 option value into nanoseconds since the epoch."""

    if value is None:
        return None

    try:
        return extract_timestamp(value.encode("utf-8"))
    except ParseError as exc:
        raise typer.BadParameter(f"invalid timestamp '{value}': {exc.reason}")
