import pathlib
from typing import Annotated, Optional

from loguru import logger
from pydantic import ValidationError
import typer

from src import dependencies as deps
from src.config.exceptions import handle_errors
from src.schemas.logs import LogLevel
from src.schemas.search import Query
from src.utils.routers import echo_line, timestamp_option


@handle_errors
def query(
    ctx: typer.Context,
    terms: Annotated[str, typer.Option(help="Whitespace-separated terms, all required within a chunk.")] = "",
    time_from: Annotated[Optional[str], typer.Option("--from", help="RFC-3339 start of the time range.")] = None,
    time_to: Annotated[Optional[str], typer.Option("--to", help="RFC-3339 end of the time range.")] = None,
    level: Annotated[Optional[LogLevel], typer.Option(help="Only lines at this level.")] = None,
    limit: Annotated[int, typer.Option(min=1, help="Most chunks to return.")] = 10,
    index: Annotated[Optional[pathlib.Path], typer.Option(help="Index directory.")] = None,
):
    """Searches indexed, verified chunks. Prints one line per matching chunk, earliest first."""

    settings = deps.get_settings(ctx)
    if index is not None:
        settings = settings.model_copy(update={"index_dir": index})

    try:
        search_query = Query(
            terms=terms.split(),
            time_from=timestamp_option(time_from),
            time_to=timestamp_option(time_to),
            level=level,
            limit=limit,
        )
    except ValidationError as exc:
        raise typer.BadParameter(str(exc.errors()[0]["msg"]))

    hits = deps.open_index(settings).search(search_query)
    logger.info(f"query matched {len(hits)} chunks")

    for hit in hits:
        metadata = hit.record.metadata
        echo_line(
            {
                "digest": hit.record.digest.hex,
                "file": metadata.file,
                "first_line": metadata.first_line_index,
                "last_line": metadata.first_line_index + len(hit.record.lines) - 1,
                "ledger_index": metadata.ledger_index,
                "matches": [
                    {
                        "line": metadata.first_line_index + position,
                        "text": hit.record.lines[position].decode("utf-8", errors="replace"),
                    }
                    for position in hit.matching_lines
                ],
            }
        )
