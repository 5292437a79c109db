import errno
import hashlib
import pathlib
import random

import pytest
from pytest_mock import MockerFixture

from src.config.constants.app import ZERO_HASH
from src.config.exceptions import IndexOutOfRange, InvalidReplicaCount, JournalCorrupted, LedgerClosed
from src.config.exceptions import LedgerUnavailable
from src.schemas.grouping import Digest256
from src.schemas.ledger import Block, LedgerRecord, RecordKind
from src.services.ledger import ENTRY_HEADER, Ledger, compute_block_hash, dump_journal, encode_block, iter_journal
from src.services.ledger import verify_journal
from src.utils.clock import FakeClock


def digest(number: int) -> Digest256:
    return Digest256.of(f"group {number}".encode())


@pytest.fixture
def journal(tmp_path: pathlib.Path, fake_clock: FakeClock) -> pathlib.Path:
    """A persisted journal of 40 records sealed into 8 blocks, one of them holding a raw record."""

    path = tmp_path / "ledger.lsj"
    with Ledger(path, clock=fake_clock) as ledger:
        for number in range(40):
            if number == 13:
                ledger.store_raw(b"2024-01-12T10:00:00.000000000Z INFO web raw line")
            else:
                ledger.store_log_hash(digest(number))
            fake_clock.advance(1_000)
            if number % 5 == 4:
                ledger.seal_block()

    return path


def test_store_and_get(ledger: Ledger) -> None:
    """Tests dense indexing, read-your-write and duplicate storage."""

    first = ledger.store_log_hash(digest(1))
    second = ledger.store_log_hash(digest(1))

    assert (first, second) == (0, 1)
    assert ledger.log_count == 2
    assert ledger.get_log_hash(0) == digest(1)
    assert ledger.get_log_hash(1) == digest(1)
    assert ledger.get_record(0).block_height == -1


def test_get_out_of_range(ledger: Ledger) -> None:
    ledger.store_log_hash(digest(1))

    with pytest.raises(IndexOutOfRange):
        ledger.get_log_hash(ledger.log_count)
    with pytest.raises(IndexOutOfRange):
        ledger.get_log_hash(-1)


def test_submission_order(ledger: Ledger) -> None:
    for number in range(100):
        ledger.store_log_hash(digest(number))

    assert [ledger.get_log_hash(index) for index in range(100)] == [digest(number) for number in range(100)]


def test_store_after_close(ledger: Ledger) -> None:
    ledger.close()

    with pytest.raises(LedgerClosed):
        ledger.store_log_hash(digest(1))


def test_contains_smallest_index(ledger: Ledger) -> None:
    """Tests that membership returns the first index and survives a side-index rebuild."""

    for number in range(10):
        ledger.store_log_hash(digest(7) if number in (3, 9) else digest(number))

    assert ledger.contains(digest(7)) == 3
    assert ledger.contains(digest(99)) is None

    before = ledger.serialize_side_index()
    ledger.rebuild_side_index()

    assert ledger.contains(digest(7)) == 3
    assert ledger.serialize_side_index() == before


def test_raw_records_keyed_by_payload_hash(ledger: Ledger) -> None:
    payload = b"a raw log line"
    index = ledger.store_raw(payload)

    assert ledger.get_record(index).kind is RecordKind.raw
    assert ledger.contains(Digest256.of(payload)) == index


def test_genesis_block(ledger: Ledger) -> None:
    genesis = ledger.blocks[0]

    assert ledger.height == 0
    assert genesis.prev_hash == ZERO_HASH
    assert genesis.records == ()
    assert genesis.sealer_id == ledger.authorities[0]


def test_seal_block_round_robin(fake_clock: FakeClock) -> None:
    """Tests that after a genesis sealed by A, the next block of 3 records is sealed by B."""

    ledger = Ledger(authorities=["A", "B"], clock=fake_clock)
    for number in range(3):
        ledger.store_log_hash(digest(number))

    block = ledger.seal_block()

    assert block is not None
    assert ledger.blocks[0].sealer_id == "A"
    assert block.sealer_id == "B"
    assert block.records == (0, 1, 2)
    assert block.prev_hash == ledger.blocks[0].block_hash
    assert all(ledger.get_record(index).block_height == 1 for index in range(3))

    ledger.store_log_hash(digest(3))
    assert ledger.seal_block().sealer_id == "A"  # type: ignore[union-attr]


def test_seal_block_nothing_pending(ledger: Ledger) -> None:
    assert ledger.seal_block() is None
    assert ledger.height == 0


def test_verify_chain_intact(journal: pathlib.Path) -> None:
    with Ledger(journal, read_only=True) as ledger:
        status = ledger.verify_chain()

    assert status.ok
    assert str(status) == "ok"


def test_replay_reproduces_state(journal: pathlib.Path, fake_clock: FakeClock) -> None:
    """Tests that reopening a journal rebuilds identical records, blocks and storage figures."""

    with Ledger(journal, read_only=True) as reopened:
        assert reopened.log_count == 40
        assert reopened.height == 8
        assert reopened.contains(digest(20)) == 20
        assert reopened.get_record(13).kind is RecordKind.raw
        assert reopened.storage_report(1).ledger_bytes_one_replica == journal.stat().st_size + len(
            reopened.serialize_side_index()
        )

    with Ledger(journal, clock=fake_clock) as appended:
        index = appended.store_log_hash(digest(100))
        appended.seal_block()

    assert index == 40
    with Ledger(journal, read_only=True) as reopened:
        assert reopened.height == 9
        assert reopened.verify_chain().ok


def test_storage_report(ledger: Ledger) -> None:
    """Tests the S x N accounting and its growth per stored digest."""

    empty = ledger.storage_report(3)
    for number in range(10):
        ledger.store_log_hash(digest(number))
    ledger.seal_block()
    report = ledger.storage_report(3)

    assert report.total_bytes == report.ledger_bytes_one_replica * 3
    assert report.record_count == 10
    assert report.ledger_bytes_one_replica > empty.ledger_bytes_one_replica

    with pytest.raises(InvalidReplicaCount):
        ledger.storage_report(0)


def test_in_memory_bytes_match_journal(tmp_path: pathlib.Path, fake_clock: FakeClock) -> None:
    """Tests that byte accounting is the same whether or not the journal is persisted."""

    persisted = Ledger(tmp_path / "a.lsj", clock=fake_clock)
    in_memory = Ledger(clock=FakeClock(fake_clock.now_ns()))
    for ledger in (persisted, in_memory):
        for number in range(7):
            ledger.store_log_hash(digest(number))
        ledger.seal_block(fake_clock.now_ns())
    persisted.close()

    assert persisted.storage_report(1) == in_memory.storage_report(1)


def test_journal_bad_magic(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "bad.lsj"
    path.write_bytes(b"NOPE\x01")

    with pytest.raises(JournalCorrupted):
        Ledger(path, read_only=True)
    assert verify_journal(path).broken_at == 0


def region_heights(data: bytes) -> list[int]:
    """Maps every byte of a clean journal to the block height whose region holds it: records belong to the block
    that seals them, the file header to the genesis block."""

    entries = list(iter_journal(data))
    heights = [0] * len(data)
    boundaries = [offset for offset, _ in entries] + [len(data)]

    owner = 0
    for position in range(len(entries) - 1, -1, -1):
        offset, entry = entries[position]
        if isinstance(entry, Block):
            owner = entry.height
        for byte in range(offset, boundaries[position + 1]):
            heights[byte] = owner

    return heights


def test_single_bit_corruption_detected(journal: pathlib.Path) -> None:
    """Tests that any single flipped bit is reported at or before the height of the region it hit."""

    clean = journal.read_bytes()
    heights = region_heights(clean)
    rng = random.Random(2024)

    for _ in range(1000):
        position = rng.randrange(len(clean))
        corrupted = bytearray(clean)
        corrupted[position] ^= 1 << rng.randrange(8)
        journal.write_bytes(bytes(corrupted))

        status = verify_journal(journal)

        assert status.broken_at is not None, f"flip at byte {position} went unnoticed"
        assert status.broken_at <= heights[position]

    journal.write_bytes(clean)
    assert verify_journal(journal).ok


def test_dump_journal(journal: pathlib.Path) -> None:
    lines = list(dump_journal(journal))

    assert lines[0].startswith("journal ")
    assert sum(" RECORD " in line for line in lines) == 40
    assert sum(" BLOCK " in line for line in lines) == 9
    assert any(f"key={hashlib.sha256(b'group 0').hexdigest()}" in line for line in lines)


def test_journal_records_decode(journal: pathlib.Path) -> None:
    records = [entry for _, entry in iter_journal(journal.read_bytes()) if isinstance(entry, LedgerRecord)]

    assert [record.index for record in records] == list(range(40))


def test_record_flip_breaks_its_block(journal: pathlib.Path) -> None:
    """Tests that changing a digest sealed in block 4 reports the chain broken at exactly 4."""

    data = bytearray(journal.read_bytes())
    offsets = {entry.index: offset for offset, entry in iter_journal(bytes(data)) if isinstance(entry, LedgerRecord)}
    data[offsets[18] - 1] ^= 0xFF
    journal.write_bytes(bytes(data))

    assert verify_journal(journal).broken_at == 4


def test_genesis_only_chain_ok(ledger: Ledger) -> None:
    assert ledger.verify_chain().ok
    assert ledger.storage_report(3).total_bytes == 3 * ledger.storage_report(1).ledger_bytes_one_replica


def ledger_fingerprint(ledger: Ledger, journal: pathlib.Path) -> str:
    records = [ledger.get_record(index).model_dump() for index in range(ledger.log_count)]
    blocks = [block.model_dump() for block in ledger.blocks]
    state = repr((records, blocks)).encode()

    return hashlib.sha256(journal.read_bytes() + ledger.serialize_side_index() + state).hexdigest()


@pytest.mark.parametrize(
    "operation, args",
    [
        ("get_log_hash", (7,)),
        ("get_record", (13,)),
        ("contains", (digest(20),)),
        ("contains", (digest(999),)),
        ("verify_chain", ()),
        ("storage_report", (3,)),
        ("seal_block", ()),
        ("rebuild_side_index", ()),
        ("serialize_side_index", ()),
    ],
)
def test_non_append_operations_leave_ledger_unchanged(
    journal: pathlib.Path, fake_clock: FakeClock, operation: str, args: tuple
) -> None:
    """Tests that reads, checks, an empty seal and a side-index rebuild change neither the journal nor the state."""

    with Ledger(journal, clock=fake_clock) as ledger:
        before = ledger_fingerprint(ledger, journal)

        getattr(ledger, operation)(*args)

        assert ledger_fingerprint(ledger, journal) == before


@pytest.mark.parametrize("record_count", [2_000, pytest.param(100_000, marks=pytest.mark.slow)])
def test_contains_matches_brute_force(fake_clock: FakeClock, record_count: int) -> None:
    """Tests that membership finds a digest iff some record holds it, at the smallest such index."""

    rng = random.Random(record_count)
    distinct = record_count // 2
    ledger = Ledger(clock=fake_clock)
    for _ in range(record_count):
        ledger.store_log_hash(digest(rng.randrange(distinct)))

    first_index: dict[bytes, int] = {}
    for index in range(ledger.log_count):
        first_index.setdefault(ledger.get_log_hash(index).value, index)

    for number in range(distinct + 100):
        assert ledger.contains(digest(number)) == first_index.get(digest(number).value)


@pytest.mark.parametrize("tail", [b"\x01\x40", ENTRY_HEADER.pack(1, 64) + bytes(10)])
def test_torn_tail_dropped_on_reopen(journal: pathlib.Path, fake_clock: FakeClock, tail: bytes) -> None:
    """Tests that an entry cut short by an interrupted append is reported by verification but trimmed when the
    journal is reopened for writing."""

    clean = journal.read_bytes()
    journal.write_bytes(clean + tail)

    assert verify_journal(journal).broken_at == 9
    with pytest.raises(JournalCorrupted):
        Ledger(journal, read_only=True)

    with Ledger(journal, clock=fake_clock) as ledger:
        assert ledger.log_count == 40
        assert journal.read_bytes() == clean
        index = ledger.store_log_hash(digest(100))
        ledger.seal_block()

    assert index == 40
    assert verify_journal(journal).ok


def test_failed_append_rolled_back(tmp_path: pathlib.Path, fake_clock: FakeClock, mocker: MockerFixture) -> None:
    """Tests that an append failing halfway is cut off the journal and raised as a transient ledger failure."""

    path = tmp_path / "ledger.lsj"
    ledger = Ledger(path, clock=fake_clock)
    ledger.store_log_hash(digest(0))
    size = path.stat().st_size
    journal_file = ledger._file

    def torn_write(data) -> int:
        journal_file.write(bytes(data)[: len(data) // 2])  # type: ignore[union-attr]
        raise OSError(errno.ENOSPC, "No space left on device")

    ledger._file = mocker.MagicMock(wraps=journal_file)
    ledger._file.write.side_effect = torn_write

    with pytest.raises(LedgerUnavailable):
        ledger.store_log_hash(digest(1))
    with pytest.raises(LedgerUnavailable):
        ledger.seal_block()

    assert path.stat().st_size == size
    assert (ledger.log_count, ledger.pending_count, ledger.height) == (1, 1, 0)
    assert ledger.storage_report(1).ledger_bytes_one_replica == size + len(ledger.serialize_side_index())

    ledger._file = journal_file
    assert ledger.store_log_hash(digest(1)) == 1
    ledger.seal_block()
    ledger.close()

    assert verify_journal(path).ok
    with Ledger(path, read_only=True) as reopened:
        assert reopened.log_count == 2


def test_block_sealed_out_of_turn(tmp_path: pathlib.Path, fake_clock: FakeClock) -> None:
    """Tests that a block re-sealed by the wrong authority, its hash recomputed, breaks the chain at that block."""

    path = tmp_path / "ledger.lsj"
    with Ledger(path, authorities=["A", "B"], clock=fake_clock) as ledger:
        ledger.store_log_hash(digest(1))
        block = ledger.seal_block()
        record = ledger.get_record(0)

    assert block is not None and block.sealer_id == "B"
    assert verify_journal(path, ["A", "B"]).ok

    forged = block.model_copy(
        update={
            "sealer_id": "A",
            "block_hash": compute_block_hash(block.height, block.prev_hash, [record], "A", block.sealed_at),
        }
    )
    data = path.read_bytes()
    offset = next(offset for offset, entry in iter_journal(data) if isinstance(entry, Block) and entry.height == 1)
    path.write_bytes(data[:offset] + encode_block(forged))

    assert verify_journal(path, ["A", "B"]).broken_at == 1
