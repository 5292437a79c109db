import datetime as dt
import pathlib
import random
from typing import Callable

import pytest
from pytest_mock import MockerFixture

from src.config.exceptions import LogFileNotFound, ManifestMismatch, ParseError
from src.schemas.archive import ContentAddress
from src.schemas.grouping import Digest256, GroupPolicy
from src.schemas.ingest import IngestConfig, StopCondition
from src.schemas.ledger import LedgerRecord
from src.schemas.verification import ChangeKind, LineRange, VerdictStatus, VerificationMode
from src.services.archive import ArchiveStore, generate_key
from src.services.ingest import run_ingest
from src.services.ledger import ENTRY_HEADER, RECORD_HEAD, Ledger, iter_journal, verify_journal
from src.services.logs import split_lines
from src.services.search import SearchIndex
from src.services.verification import diff_against_archive, localize, pinpoint_changes, verify_file
from src.utils.clock import FakeClock


POLICY = GroupPolicy(group_size=5, max_wait=dt.timedelta(hours=1))
INTACT = VerdictStatus.intact
TAMPERED = VerdictStatus.tampered


def ingest(path: pathlib.Path, ledger: Ledger, clock: FakeClock, manifest_path: pathlib.Path | None = None) -> None:
    count = len(split_lines(path.read_bytes()))
    config = IngestConfig(policy=POLICY, stop_condition=StopCondition.lines(count), manifest_path=manifest_path)
    run_ingest(path, config, ledger, clock=clock)


def rewrite_line(path: pathlib.Path, number: int, position: int = -1) -> None:
    """Replaces one byte of a line with another printable byte, leaving the line structure intact."""

    lines = split_lines(path.read_bytes())
    line = bytearray(lines[number])
    line[position] = ord("#") if line[position] != ord("#") else ord("%")
    lines[number] = bytes(line)
    path.write_bytes(b"\n".join(lines) + b"\n")


@pytest.fixture
def ingested(write_corpus: Callable[..., pathlib.Path], ledger: Ledger, fake_clock: FakeClock) -> pathlib.Path:
    """A 20-line log file anchored in groups of five."""

    path = write_corpus(20)
    ingest(path, ledger, fake_clock)
    return path


def test_intact_file(ingested: pathlib.Path, ledger: Ledger) -> None:
    report = verify_file(ingested, POLICY, ledger)

    assert report.all_valid
    assert report.line_count == 20
    assert [verdict.ledger_index for verdict in report.verdicts] == [0, 1, 2, 3]
    assert localize(report) == [LineRange(start=0, end=20, status=INTACT)]


def test_modified_line_flags_its_group(ingested: pathlib.Path, ledger: Ledger) -> None:
    """Tests that changing one byte of line 7 flags exactly the group holding lines 5 to 9."""

    rewrite_line(ingested, 7)

    report = verify_file(ingested, POLICY, ledger)

    assert not report.all_valid
    assert [verdict.status for verdict in report.verdicts] == [INTACT, TAMPERED, INTACT, INTACT]
    assert localize(report) == [
        LineRange(start=0, end=5, status=INTACT),
        LineRange(start=5, end=10, status=TAMPERED),
        LineRange(start=10, end=20, status=INTACT),
    ]


def test_appended_line_flagged(ingested: pathlib.Path, ledger: Ledger) -> None:
    with ingested.open("ab") as file_:
        file_.write(b"2024-01-12T10:00:00Z INFO intruder added later\n")

    report = verify_file(ingested, POLICY, ledger)

    assert [verdict.status for verdict in report.verdicts] == [INTACT] * 4 + [TAMPERED]
    assert localize(report)[-1] == LineRange(start=20, end=21, status=TAMPERED)


def test_never_ingested_file(write_corpus: Callable[..., pathlib.Path], ledger: Ledger) -> None:
    path = write_corpus(12, seed=99)

    report = verify_file(path, POLICY, ledger)

    assert all(verdict.status is TAMPERED and verdict.ledger_index is None for verdict in report.verdicts)
    assert localize(report) == [LineRange(start=0, end=12, status=TAMPERED)]


def test_missing_file(tmp_path: pathlib.Path, ledger: Ledger) -> None:
    with pytest.raises(LogFileNotFound):
        verify_file(tmp_path / "nope.log", POLICY, ledger)


def test_logtime_needs_timestamps(tmp_path: pathlib.Path, ledger: Ledger) -> None:
    path = tmp_path / "app.log"
    path.write_bytes(b"2024-01-12T10:00:00Z INFO web fine\nno timestamp here\n")

    with pytest.raises(ParseError) as exc_info:
        verify_file(path, POLICY, ledger)

    assert "line 1" in str(exc_info.value)


def test_manifest_mode_requires_manifest(ingested: pathlib.Path, ledger: Ledger) -> None:
    with pytest.raises(ManifestMismatch):
        verify_file(ingested, POLICY, ledger, mode=VerificationMode.manifest)


def test_manifest_longer_than_file(
    write_corpus: Callable[..., pathlib.Path], ledger: Ledger, fake_clock: FakeClock
) -> None:
    path = write_corpus(10)
    manifest_path = path.with_suffix(".manifest")
    ingest(path, ledger, fake_clock, manifest_path)
    path.write_bytes(b"\n".join(split_lines(path.read_bytes())[:6]) + b"\n")

    with pytest.raises(ManifestMismatch):
        verify_file(path, POLICY, ledger, mode=VerificationMode.manifest, manifest_path=manifest_path)


def test_manifest_mode_trailing_lines(
    write_corpus: Callable[..., pathlib.Path], ledger: Ledger, fake_clock: FakeClock
) -> None:
    """Tests that lines past the recorded boundaries are verified as one extra group."""

    path = write_corpus(10)
    manifest_path = path.with_suffix(".manifest")
    ingest(path, ledger, fake_clock, manifest_path)
    with path.open("ab") as file_:
        file_.write(b"appended one\nappended two\n")

    report = verify_file(path, POLICY, ledger, mode=VerificationMode.manifest, manifest_path=manifest_path)

    assert [(verdict.first_line_index, verdict.status) for verdict in report.verdicts] == [
        (0, INTACT),
        (5, INTACT),
        (10, TAMPERED),
    ]


def test_manifest_mode_soundness(
    write_corpus: Callable[..., pathlib.Path], ledger: Ledger, fake_clock: FakeClock
) -> None:
    """Tests a 10,000-line file verifies intact, then that each of 100 random single-byte edits flags exactly the
    group that holds the edited line."""

    path = write_corpus(10_000)
    manifest_path = path.with_suffix(".manifest")
    ingest(path, ledger, fake_clock, manifest_path)
    original = path.read_bytes()
    line_count = len(split_lines(original))

    report = verify_file(path, POLICY, ledger, mode=VerificationMode.manifest, manifest_path=manifest_path)
    assert report.all_valid and report.line_count == line_count

    rng = random.Random(1234)
    for _ in range(100):
        number = rng.randrange(line_count)
        length = len(split_lines(original)[number])
        path.write_bytes(original)
        rewrite_line(path, number, rng.randrange(length))

        report = verify_file(path, POLICY, ledger, mode=VerificationMode.manifest, manifest_path=manifest_path)

        tampered = [verdict.first_line_index for verdict in report.verdicts if verdict.status is TAMPERED]
        assert tampered == [number - number % POLICY.group_size]


def test_tampered_file_never_archived_or_indexed(ingested: pathlib.Path, ledger: Ledger, mocker: MockerFixture):
    """Tests that a file with a tampered group reaches neither the archive nor the index."""

    archive = mocker.Mock()
    index = mocker.Mock()
    rewrite_line(ingested, 3)
    records_before = ledger.log_count

    report = verify_file(ingested, POLICY, ledger, archive=archive, archive_key=generate_key(), index=index)

    archive.put.assert_not_called()
    index.index_chunks.assert_not_called()
    assert report.archived_as is None and not report.indexed
    assert ledger.log_count == records_before


def test_intact_file_archived_and_indexed(ingested: pathlib.Path, ledger: Ledger, mocker: MockerFixture) -> None:
    """Tests that an intact file is archived once, its address anchored, and all its chunks indexed."""

    address = ContentAddress(digest=Digest256.of(b"blob"), size=99)
    archive = mocker.Mock()
    archive.put.return_value = address
    index = mocker.Mock()

    report = verify_file(ingested, POLICY, ledger, archive=archive, archive_key=generate_key(), index=index)

    archive.put.assert_called_once()
    assert archive.put.call_args.args[0] == ingested.read_bytes()
    assert report.archived_as == address
    assert ledger.get_log_hash(report.anchor_index) == address.digest  # type: ignore[arg-type]
    assert ledger.get_record(report.anchor_index).block_height == ledger.height  # type: ignore[arg-type]
    assert ledger.pending_count == 0
    records = index.index_chunks.call_args.args[0]
    assert [record.metadata.first_line_index for record in records] == [0, 5, 10, 15]
    assert all(record.metadata.archive_address == address.digest.hex for record in records)
    assert report.indexed


def test_verify_into_real_archive_and_index(ingested: pathlib.Path, ledger: Ledger, tmp_path: pathlib.Path) -> None:
    store = ArchiveStore(tmp_path / "archive")
    index = SearchIndex(tmp_path / "index")
    key = generate_key()

    report = verify_file(ingested, POLICY, ledger, archive=store, archive_key=key, index=index)

    assert store.get(report.archived_as, key) == ingested.read_bytes()  # type: ignore[arg-type]
    assert len(index) == 4


def test_archive_anchor_sealed_into_chain(
    write_corpus: Callable[..., pathlib.Path], tmp_path: pathlib.Path, fake_clock: FakeClock
) -> None:
    """Tests that the anchored archive address is sealed into a block, so altering it in the journal breaks the
    chain at that block."""

    path = write_corpus(20)
    journal = tmp_path / "ledger.lsj"
    with Ledger(journal, clock=fake_clock) as ledger:
        ingest(path, ledger, fake_clock)
        store = ArchiveStore(tmp_path / "archive")
        report = verify_file(path, POLICY, ledger, archive=store, archive_key=generate_key())
        sealed_at = ledger.height

    assert report.anchor_index is not None
    assert verify_journal(journal).ok

    data = bytearray(journal.read_bytes())
    offset = next(
        offset
        for offset, entry in iter_journal(bytes(data))
        if isinstance(entry, LedgerRecord) and entry.index == report.anchor_index
    )
    data[offset + ENTRY_HEADER.size + RECORD_HEAD.size] ^= 0x01
    journal.write_bytes(bytes(data))

    assert verify_journal(journal).broken_at == sealed_at


def test_pinpoint_changes() -> None:
    """Tests that edits, insertions and deletions are reported against the right line on each side."""

    archived = [b"a", b"b", b"c", b"d", b"e"]
    current = [b"a", b"B", b"c", b"e", b"f"]

    changes = pinpoint_changes(current, archived)

    assert [(change.kind, change.current_line, change.archived_line) for change in changes] == [
        (ChangeKind.modified, 1, 1),
        (ChangeKind.deleted, None, 3),
        (ChangeKind.inserted, 4, None),
    ]
    assert pinpoint_changes(archived, archived) == []


def test_diff_against_archive(tmp_path: pathlib.Path, write_corpus: Callable[..., pathlib.Path]) -> None:
    path = write_corpus(30)
    store = ArchiveStore(tmp_path / "archive")
    key = generate_key()
    address = store.put(path.read_bytes(), key)
    rewrite_line(path, 17)

    changes = diff_against_archive(path, address, store, key)

    assert len(changes) == 1
    assert changes[0].kind is ChangeKind.modified
    assert changes[0].current_line == changes[0].archived_line == 17
