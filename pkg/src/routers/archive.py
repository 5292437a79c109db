import pathlib
import sys
from typing import Annotated, Optional

from loguru import logger
import typer

from src import dependencies as deps
from src.config.constants.exceptions import EXIT_VERIFICATION_FAILED
from src.config.exceptions import ArchiveNotFound, handle_errors
from src.config.services import Settings
from src.schemas.archive import ContentAddress
from src.schemas.grouping import Digest256
from src.services.archive import ArchiveStore, generate_key, write_key
from src.services.verification import diff_against_archive, read_log_file
from src.utils.routers import echo_line


router = typer.Typer(help="Encrypted content-addressed archive of verified log files.", no_args_is_help=True)

ArchiveOption = Annotated[Optional[pathlib.Path], typer.Option("--archive", help="Archive directory.")]
KeyFileOption = Annotated[Optional[pathlib.Path], typer.Option("--key-file", help="Archive key file.")]


def _settings(ctx: typer.Context, archive: pathlib.Path | None, key_file: pathlib.Path | None) -> Settings:
    overrides = {"archive_dir": archive, "key_file": key_file}
    return deps.get_settings(ctx).model_copy(update={key: value for key, value in overrides.items() if value})


def _resolve(store: ArchiveStore, digest_hex: str) -> ContentAddress:
    try:
        digest = Digest256.from_hex(digest_hex)
    except ValueError:
        raise typer.BadParameter(f"'{digest_hex}' is not a 64-character hex digest")

    address = store.find(digest)
    if address is None:
        raise ArchiveNotFound(f"no archive blob at {digest_hex}")

    return address


@router.command("put")
@handle_errors
def put(
    ctx: typer.Context,
    file: Annotated[pathlib.Path, typer.Argument(help="File to archive.")],
    archive: ArchiveOption = None,
    key_file: KeyFileOption = None,
):
    """Encrypts a file into the archive and prints its content address."""

    settings = _settings(ctx, archive, key_file)
    address = deps.open_archive(settings).put(read_log_file(file), deps.load_archive_key(settings))
    echo_line({"digest": address.digest.hex, "size": address.size})


@router.command("get")
@handle_errors
def get(
    ctx: typer.Context,
    digest: Annotated[str, typer.Argument(help="Content address (hex).")],
    output: Annotated[
        Optional[pathlib.Path], typer.Option("--output", "-o", help="Write here instead of standard output.")
    ] = None,
    archive: ArchiveOption = None,
    key_file: KeyFileOption = None,
):
    """Decrypts an archived blob back into the original bytes."""

    settings = _settings(ctx, archive, key_file)
    store = deps.open_archive(settings)
    plaintext = store.get(_resolve(store, digest), deps.load_archive_key(settings))

    if output is None:
        sys.stdout.buffer.write(plaintext)
        sys.stdout.flush()
    else:
        output.write_bytes(plaintext)
        logger.info(f"restored {len(plaintext)} bytes to {output}")


@router.command("check")
@handle_errors
def check(
    ctx: typer.Context,
    digest: Annotated[str, typer.Argument(help="Content address (hex).")],
    archive: ArchiveOption = None,
):
    """Re-hashes a stored blob against its address. Exits 1 on mismatch."""

    store = deps.open_archive(_settings(ctx, archive, None))
    try:
        address = _resolve(store, digest)
    except ArchiveNotFound:
        valid = False
    else:
        valid = store.verify_address(address)

    echo_line({"digest": digest, "valid": valid})
    if not valid:
        raise typer.Exit(EXIT_VERIFICATION_FAILED)


@router.command("diff")
@handle_errors
def diff(
    ctx: typer.Context,
    file: Annotated[pathlib.Path, typer.Argument(help="Current log file.")],
    digest: Annotated[str, typer.Argument(help="Content address of its archived copy.")],
    archive: ArchiveOption = None,
    key_file: KeyFileOption = None,
):
    """Pinpoints the lines where a file differs from its archived copy. Exits 1 if any differ."""

    settings = _settings(ctx, archive, key_file)
    store = deps.open_archive(settings)
    changes = diff_against_archive(
        file, _resolve(store, digest), store, deps.load_archive_key(settings), settings.strict_bytes
    )

    for change in changes:
        echo_line(
            {
                "kind": change.kind.value,
                "current_line": change.current_line,
                "archived_line": change.archived_line,
                "current": change.current.decode("utf-8", errors="replace") if change.current is not None else None,
                "archived": change.archived.decode("utf-8", errors="replace") if change.archived is not None else None,
            }
        )

    if changes:
        raise typer.Exit(EXIT_VERIFICATION_FAILED)


@router.command("keygen")
@handle_errors
def keygen(
    key_file: Annotated[pathlib.Path, typer.Argument(help="Where to write the new key (must not exist).")],
):
    """Creates a random 256-bit archive key file readable only by its owner."""

    key = generate_key()
    write_key(key, key_file)
    echo_line({"key_file": str(key_file), "key_id": key.key_id})

