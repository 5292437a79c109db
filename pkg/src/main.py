import pathlib
import sys
from typing import Annotated, Optional

import dotenv
from pydantic import ValidationError
import typer

from src.config.constants.app import PROJECT_NAME
from src.config.constants.logs import (
    LOGGER_CONSOLE_FORMAT,
    LOGGER_FILENAME_FORMAT,
    LOGGER_MESSAGE_FORMAT,
    LOGS_DIRECTORY,
)
from src.config.services import generate_settings_config, initialize_logger
from src.routers import archive, bench, gen, ingest, ledger, query, verify, watch


dotenv.load_dotenv()


app = typer.Typer(
    name=PROJECT_NAME,
    help="Tamper-evident log anchoring: ingest, verify, archive and search log files.",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)

app.command("gen")(gen.generate)
app.command("ingest")(ingest.ingest)
app.command("verify")(verify.verify)
app.command("query")(query.query)
app.command("bench")(bench.bench)
app.command("watch")(watch.watch)
app.add_typer(archive.router, name="archive")
app.add_typer(ledger.router, name="ledger")


@app.callback()
def main(
    ctx: typer.Context,
    ledger_path: Annotated[Optional[pathlib.Path], typer.Option("--ledger", help="Ledger journal file.")] = None,
    config: Annotated[
        Optional[pathlib.Path], typer.Option("--config", help="YAML file mirroring all settings.")
    ] = None,
    env_file: Annotated[Optional[str], typer.Option(help="Alternative .env file.")] = None,
    log_level: Annotated[Optional[str], typer.Option(help="Log level, e.g. DEBUG.")] = None,
):
    """Parses the global options into settings shared by every command and configures logging."""

    try:
        settings = generate_settings_config(env_file, config, ledger_path=ledger_path, log_level=log_level)
    except ValidationError as exc:
        raise typer.BadParameter(f"invalid configuration: {exc}")

    if settings.log_to_file:
        initialize_logger(
            LOGGER_MESSAGE_FORMAT,
            settings.logs_directory or pathlib.Path(LOGS_DIRECTORY),
            LOGGER_FILENAME_FORMAT,
            level=settings.log_level,
        )
    else:
        initialize_logger(LOGGER_CONSOLE_FORMAT, filename=sys.stderr, level=settings.log_level)

    ctx.obj = settings


if __name__ == "__main__":
    app()
