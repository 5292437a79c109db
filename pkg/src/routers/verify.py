import datetime as dt
import pathlib
from typing import Annotated, Optional

from loguru import logger
import orjson
import typer

from src import dependencies as deps
from src.config.constants.app import INTACT_MESSAGE, MODIFIED_MESSAGE
from src.config.constants.exceptions import EXIT_VERIFICATION_FAILED
from src.config.exceptions import handle_errors
from src.schemas.grouping import GroupPolicy
from src.schemas.verification import VerificationMode
from src.services.verification import localize, verify_file
from src.utils.config import parse_duration
from src.utils.routers import LedgerOption, echo_line


@handle_errors
def verify(
    ctx: typer.Context,
    file: Annotated[pathlib.Path, typer.Argument(help="Finished log file to verify.")],
    chunk_size: Annotated[Optional[int], typer.Option(min=1, help="Lines per group, as at ingest.")] = None,
    max_wait: Annotated[
        Optional[dt.timedelta], typer.Option(parser=parse_duration, help="Group time window, as at ingest.")
    ] = None,
    manifest: Annotated[
        Optional[pathlib.Path], typer.Option(help="Replay the boundaries recorded at ingest instead of timestamps.")
    ] = None,
    generation: Annotated[int, typer.Option(min=0, help="File generation to take from the manifest.")] = 0,
    archive: Annotated[Optional[pathlib.Path], typer.Option(help="Archive an intact file into this store.")] = None,
    key_file: Annotated[Optional[pathlib.Path], typer.Option(help="Archive key file.")] = None,
    index: Annotated[Optional[pathlib.Path], typer.Option(help="Index an intact file's chunks here.")] = None,
    report: Annotated[Optional[pathlib.Path], typer.Option(help="Also write the full report as JSON.")] = None,
    ledger_path: LedgerOption = None,
):
    """Replays a log file into groups and checks every group digest against the ledger. Exits 0 iff intact."""

    settings = deps.override_settings(
        ctx, archive_dir=archive, key_file=key_file, index_dir=index, ledger_path=ledger_path
    )
    policy = GroupPolicy(group_size=chunk_size or settings.chunk_size, max_wait=max_wait or settings.max_wait)
    mode = VerificationMode.manifest if manifest is not None else VerificationMode.logtime

    archive_store = deps.open_archive(settings) if settings.archive_dir is not None else None
    archive_key = deps.load_archive_key(settings) if archive_store is not None else None
    search_index = deps.open_index(settings) if settings.index_dir is not None else None

    with deps.open_ledger(settings, read_only=archive_store is None) as ledger:
        result = verify_file(
            file,
            policy,
            ledger,
            mode,
            manifest_path=manifest,
            manifest_generation=generation,
            archive=archive_store,
            archive_key=archive_key,
            index=search_index,
            strict_bytes=settings.strict_bytes,
        )

    for line_range in localize(result):
        echo_line(line_range)
    if result.archived_as is not None:
        echo_line({"archived_as": result.archived_as.digest.hex, "anchor_index": result.anchor_index})

    if report is not None:
        report.write_bytes(orjson.dumps(result.model_dump(mode="json"), option=orjson.OPT_INDENT_2))
        logger.info(f"wrote verification report to {report}")

    typer.echo(INTACT_MESSAGE if result.all_valid else MODIFIED_MESSAGE)
    if not result.all_valid:
        raise typer.Exit(EXIT_VERIFICATION_FAILED)
