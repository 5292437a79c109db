import pathlib
from typing import Annotated, Optional

import typer

from src import dependencies as deps
from src.config.constants.exceptions import EXIT_VERIFICATION_FAILED
from src.config.exceptions import handle_errors
from src.services.ledger import dump_journal, verify_journal
from src.utils.routers import echo_line


router = typer.Typer(help="Inspect the ledger journal.", no_args_is_help=True)


def _journal(ctx: typer.Context, journal: pathlib.Path | None) -> pathlib.Path:
    return deps.require_path(journal or deps.get_settings(ctx).ledger_path, "--ledger")


@router.command("dump")
@handle_errors
def dump(
    ctx: typer.Context,
    journal: Annotated[Optional[pathlib.Path], typer.Argument(help="Journal file, defaults to --ledger.")] = None,
):
    """Prints every record and block of the journal."""

    for line in dump_journal(_journal(ctx, journal)):
        typer.echo(line)


@router.command("verify")
@handle_errors
def verify(
    ctx: typer.Context,
    journal: Annotated[Optional[pathlib.Path], typer.Argument(help="Journal file, defaults to --ledger.")] = None,
):
    """Recomputes the block hash chain. Exits 1 with the first broken height if the journal was altered."""

    status = verify_journal(_journal(ctx, journal), deps.get_settings(ctx).authorities)
    echo_line(status)

    if not status.ok:
        raise typer.Exit(EXIT_VERIFICATION_FAILED)


@router.command("report")
@handle_errors
def report(
    ctx: typer.Context,
    replicas: Annotated[Optional[int], typer.Option(help="Replica count, defaults to the configured one.")] = None,
):
    """Prints the ledger's storage footprint for one replica and for all replicas."""

    settings = deps.get_settings(ctx)
    deps.require_path(settings.ledger_path, "--ledger")

    with deps.open_ledger(settings, read_only=True) as ledger:
        echo_line(ledger.storage_report(replicas if replicas is not None else settings.replica_count))
