import datetime as dt
import hashlib
import os
import pathlib
import struct
import threading
from typing import IO, Iterator

from typing_extensions import Self

from loguru import logger

from src.config.constants.app import DEFAULT_AUTHORITIES, DEFAULT_GENESIS_TIME, LEDGER_FORMAT_VERSION, LEDGER_MAGIC
from src.config.constants.app import DIGEST_SIZE, ZERO_HASH
from src.config.exceptions import IndexOutOfRange, InvalidReplicaCount, JournalCorrupted, JournalTornTail
from src.config.exceptions import LedgerClosed, LedgerUnavailable
from src.schemas.grouping import Digest256
from src.schemas.ledger import Block, ChainStatus, LedgerRecord, RecordKind, StorageReport
from src.utils.clock import Clock, SystemClock, datetime_to_nanos


TAG_RECORD = 0x01
TAG_BLOCK = 0x02

JOURNAL_HEADER = LEDGER_MAGIC + struct.pack("<B", LEDGER_FORMAT_VERSION)
ENTRY_HEADER = struct.Struct("<BI")  # tag, body length
RECORD_HEAD = struct.Struct("<QBqI")  # index, kind, submitted_at, payload length
BLOCK_HEAD = struct.Struct("<Q32sI")  # height, prev_hash, record count
BLOCK_TAIL = struct.Struct("<q32s")  # sealed_at, block_hash
RECORD_INDEX = struct.Struct("<Q")
SEALER_LENGTH = struct.Struct("<H")
SEALED_AT = struct.Struct("<q")
RECORD_HASH_PREFIX = struct.Struct("<QBq")  # index, kind, submitted_at
SIDE_INDEX_COUNT = struct.Struct("<I")


def record_key(record: LedgerRecord) -> bytes:
    """Raw lookup key of a record: the digest for hash records, the payload's SHA-256 for raw ones."""

    if record.kind is RecordKind.hash:
        return record.payload
    return hashlib.sha256(record.payload).digest()


def compute_block_hash(
    height: int, prev_hash: bytes, records: list[LedgerRecord], sealer_id: str, sealed_at: int
) -> bytes:
    """SHA-256 over the height, the predecessor's hash, each sealed record (index, kind, submission time, key), the
    sealer and the seal time, in that fixed little-endian serialization."""

    hasher = hashlib.sha256()
    hasher.update(RECORD_INDEX.pack(height))
    hasher.update(prev_hash)

    for record in records:
        hasher.update(RECORD_HASH_PREFIX.pack(record.index, record.kind.value, record.submitted_at))
        hasher.update(record_key(record))

    sealer = sealer_id.encode("utf-8")
    hasher.update(SEALER_LENGTH.pack(len(sealer)))
    hasher.update(sealer)
    hasher.update(SEALED_AT.pack(sealed_at))

    return hasher.digest()


def encode_record(record: LedgerRecord) -> bytes:
    body = RECORD_HEAD.pack(record.index, record.kind.value, record.submitted_at, len(record.payload))
    return ENTRY_HEADER.pack(TAG_RECORD, len(body) + len(record.payload)) + body + record.payload


def encode_block(block: Block) -> bytes:
    sealer = block.sealer_id.encode("utf-8")
    body = b"".join(
        [
            BLOCK_HEAD.pack(block.height, block.prev_hash, len(block.records)),
            b"".join(RECORD_INDEX.pack(index) for index in block.records),
            SEALER_LENGTH.pack(len(sealer)),
            sealer,
            BLOCK_TAIL.pack(block.sealed_at, block.block_hash),
        ]
    )
    return ENTRY_HEADER.pack(TAG_BLOCK, len(body)) + body


def _decode_record(body: bytes, offset: int, height: int) -> LedgerRecord:
    if len(body) < RECORD_HEAD.size:
        raise JournalCorrupted("record entry too short", offset, height)

    index, kind, submitted_at, payload_length = RECORD_HEAD.unpack_from(body)
    if len(body) != RECORD_HEAD.size + payload_length:
        raise JournalCorrupted("record length disagrees with its payload", offset, height)
    if kind not in (RecordKind.hash.value, RecordKind.raw.value):
        raise JournalCorrupted(f"unknown record kind {kind}", offset, height)
    if kind == RecordKind.hash.value and payload_length != DIGEST_SIZE:
        raise JournalCorrupted("hash record payload is not 32 bytes", offset, height)

    return LedgerRecord(
        index=index, kind=RecordKind(kind), payload=body[RECORD_HEAD.size :], submitted_at=submitted_at
    )


def _decode_block(body: bytes, offset: int, height: int) -> Block:
    if len(body) < BLOCK_HEAD.size:
        raise JournalCorrupted("block entry too short", offset, height)

    block_height, prev_hash, count = BLOCK_HEAD.unpack_from(body)
    position = BLOCK_HEAD.size
    if len(body) < position + count * RECORD_INDEX.size + SEALER_LENGTH.size:
        raise JournalCorrupted("block record list overruns its entry", offset, height)

    records = tuple(RECORD_INDEX.unpack_from(body, position + i * RECORD_INDEX.size)[0] for i in range(count))
    position += count * RECORD_INDEX.size
    (sealer_length,) = SEALER_LENGTH.unpack_from(body, position)
    position += SEALER_LENGTH.size

    if len(body) != position + sealer_length + BLOCK_TAIL.size:
        raise JournalCorrupted("block length disagrees with its fields", offset, height)

    try:
        sealer_id = body[position : position + sealer_length].decode("utf-8")
    except UnicodeDecodeError:
        raise JournalCorrupted("sealer id is not valid UTF-8", offset, height)

    sealed_at, block_hash = BLOCK_TAIL.unpack_from(body, position + sealer_length)

    return Block(
        height=block_height,
        prev_hash=prev_hash,
        records=records,
        sealer_id=sealer_id,
        sealed_at=sealed_at,
        block_hash=block_hash,
    )


def iter_journal(data: bytes) -> Iterator[tuple[int, LedgerRecord | Block]]:
    """Parses a journal, yielding `(offset, entry)` in file order. Checks structure only (framing, dense record
    indices, each block sealing exactly the pending records at the next height); hashes are left to
    `Ledger.verify_chain`. Raises `JournalCorrupted` naming the block height whose region is damaged."""

    if len(data) < len(JOURNAL_HEADER) or data[: len(LEDGER_MAGIC)] != LEDGER_MAGIC:
        raise JournalCorrupted("missing journal magic", 0, 0)
    if data[len(LEDGER_MAGIC)] != LEDGER_FORMAT_VERSION:
        raise JournalCorrupted(f"unsupported journal version {data[len(LEDGER_MAGIC)]}", len(LEDGER_MAGIC), 0)

    offset = len(JOURNAL_HEADER)
    record_count = 0
    block_count = 0
    pending: list[int] = []

    while offset < len(data):
        if offset + ENTRY_HEADER.size > len(data):
            raise JournalTornTail("truncated entry header", offset, block_count)

        tag, length = ENTRY_HEADER.unpack_from(data, offset)
        body_start = offset + ENTRY_HEADER.size
        if body_start + length > len(data):
            raise JournalTornTail("entry overruns the journal", offset, block_count)
        body = data[body_start : body_start + length]

        if tag == TAG_RECORD:
            record = _decode_record(body, offset, block_count)
            if record.index != record_count:
                raise JournalCorrupted(
                    f"record index {record.index} where {record_count} expected", offset, block_count
                )
            pending.append(record.index)
            record_count += 1
            yield offset, record
        elif tag == TAG_BLOCK:
            block = _decode_block(body, offset, block_count)
            if block.height != block_count:
                raise JournalCorrupted(f"block height {block.height} where {block_count} expected", offset, block_count)
            if list(block.records) != pending:
                raise JournalCorrupted("block does not seal exactly the pending records", offset, block_count)
            pending = []
            block_count += 1
            yield offset, block
        else:
            raise JournalCorrupted(f"unknown entry tag {tag}", offset, block_count)

        offset = body_start + length

    if block_count == 0:
        raise JournalCorrupted("journal has no genesis block", offset, 0)


class Ledger:
    """Ledger emulates the on-chain layer: an append-only, densely indexed store of log hashes (the storage contract),
    sealed into Proof-of-Authority blocks that form a hash chain.\n
    Every write is appended to a length-prefixed binary journal when `path` is set; reopening the journal replays it
    and reproduces the same records, blocks and block hashes. Writes are serialized by an internal lock, so one handle
    can be shared across threads. `latency` delays every write and membership query, emulating an RPC round trip."""

    def __init__(
        self,
        path: pathlib.Path | None = None,
        authorities: list[str] | None = None,
        genesis_time: dt.datetime = DEFAULT_GENESIS_TIME,
        clock: Clock | None = None,
        latency: dt.timedelta = dt.timedelta(0),
        read_only: bool = False,
        durable: bool = False,
    ) -> None:
        self.path = path
        self.authorities = list(authorities) if authorities else list(DEFAULT_AUTHORITIES)
        self._clock = clock if clock is not None else SystemClock()
        self._latency = latency.total_seconds()
        self._durable = durable
        self._lock = threading.RLock()

        self._records: list[LedgerRecord] = []
        self._blocks: list[Block] = []
        self._pending: list[int] = []
        self._side_index: dict[bytes, list[int]] = {}
        self._journal_bytes = 0
        self._file: IO[bytes] | None = None
        self._closed = read_only

        fresh = path is None or not path.exists() or path.stat().st_size == 0
        if fresh:
            if read_only and path is not None:
                raise FileNotFoundError(f"ledger journal {path} does not exist")
            self._create_genesis(datetime_to_nanos(genesis_time))
        else:
            self._replay(path, read_only)  # type: ignore[arg-type]

        if path is not None and not read_only:
            self._file = path.open("ab", buffering=0)
            if fresh:
                self._write(JOURNAL_HEADER + encode_block(self._blocks[0]), count=False)

    def __enter__(self) -> Self:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _create_genesis(self, genesis_ns: int) -> None:
        sealer = self.authorities[0]
        block = Block(
            height=0,
            prev_hash=ZERO_HASH,
            records=(),
            sealer_id=sealer,
            sealed_at=genesis_ns,
            block_hash=compute_block_hash(0, ZERO_HASH, [], sealer, genesis_ns),
        )
        self._blocks.append(block)
        self._journal_bytes = len(JOURNAL_HEADER) + len(encode_block(block))

    def _replay(self, path: pathlib.Path, read_only: bool) -> None:
        """Rebuilds the in-memory state from the journal. Opened for writing, a journal whose last entry was cut
        short by an interrupted append is truncated back to its last complete entry."""

        try:
            data = path.read_bytes()
        except OSError as exc:
            logger.error(f"error reading ledger journal {path}: {exc}")
            raise

        try:
            for _, entry in iter_journal(data):
                if isinstance(entry, LedgerRecord):
                    self._records.append(entry)
                    self._pending.append(entry.index)
                    self._side_index.setdefault(record_key(entry), []).append(entry.index)
                else:
                    self._apply_block(entry)
        except JournalTornTail as exc:
            if read_only or not self._blocks:
                raise

            logger.warning(f"dropping {len(data) - exc.offset} bytes of an incomplete entry at the end of {path}")
            os.truncate(path, exc.offset)
            data = data[: exc.offset]

        self._journal_bytes = len(data)
        logger.info(f"replayed ledger journal {path}: {len(self._records)} records, {len(self._blocks)} blocks")

    def _apply_block(self, block: Block) -> None:
        for index in block.records:
            self._records[index] = self._records[index].model_copy(update={"block_height": block.height})
        self._blocks.append(block)
        self._pending = []

    def _write(self, data: bytes, count: bool = True) -> None:
        """Appends one whole entry. A failed append is cut back off the journal and raised as `LedgerUnavailable`,
        leaving the in-memory state untouched."""

        if self._file is not None:
            start = self._file.tell()
            try:
                view = memoryview(data)
                while view:
                    view = view[self._file.write(view) :]
                if self._durable:
                    os.fsync(self._file.fileno())
            except OSError as exc:
                logger.error(f"error appending to ledger journal {self.path}: {exc}")
                self._rollback(start)
                raise LedgerUnavailable(f"journal append failed: {exc}")

        if count:
            self._journal_bytes += len(data)

    def _rollback(self, size: int) -> None:
        try:
            os.ftruncate(self._file.fileno(), size)  # type: ignore[union-attr]
        except OSError as exc:
            logger.error(f"error truncating ledger journal {self.path} back to {size} bytes: {exc}")

    def _simulate_latency(self) -> None:
        if self._latency > 0:
            self._clock.sleep(self._latency)

    def _append(self, kind: RecordKind, payload: bytes) -> int:
        self._simulate_latency()

        with self._lock:
            if self._closed:
                raise LedgerClosed()

            record = LedgerRecord(
                index=len(self._records), kind=kind, payload=payload, submitted_at=self._clock.now_ns()
            )
            self._write(encode_record(record))
            self._records.append(record)
            self._pending.append(record.index)
            self._side_index.setdefault(record_key(record), []).append(record.index)

        return record.index

    def store_log_hash(self, digest: Digest256) -> int:
        """Appends the digest at index `log_count` and returns that index. Duplicates are stored again; the record
        stays pending until the next seal."""

        return self._append(RecordKind.hash, digest.value)

    def store_raw(self, payload: bytes) -> int:
        """Appends a whole raw payload instead of its digest (raw-storage baseline)."""

        return self._append(RecordKind.raw, payload)

    @property
    def log_count(self) -> int:
        return len(self._records)

    @property
    def height(self) -> int:
        """Height of the latest sealed block."""

        return len(self._blocks) - 1

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    @property
    def closed(self) -> bool:
        return self._closed

    @property
    def blocks(self) -> list[Block]:
        with self._lock:
            return list(self._blocks)

    def get_record(self, index: int) -> LedgerRecord:
        with self._lock:
            if not 0 <= index < len(self._records):
                raise IndexOutOfRange(index, len(self._records))

            return self._records[index]

    def get_log_hash(self, index: int) -> Digest256:
        """Returns the digest stored at `index`."""

        return Digest256(value=record_key(self.get_record(index)))

    def contains(self, digest: Digest256) -> int | None:
        """Returns the smallest index holding `digest`, or `None`."""

        self._simulate_latency()

        with self._lock:
            indices = self._side_index.get(digest.value)

        return indices[0] if indices else None

    def rebuild_side_index(self) -> None:
        """Recomputes the digest -> indices index from the record list."""

        with self._lock:
            side_index: dict[bytes, list[int]] = {}
            for record in self._records:
                side_index.setdefault(record_key(record), []).append(record.index)
            self._side_index = side_index

    def serialize_side_index(self) -> bytes:
        """Side index in key order: 32-byte key, u32 count, u64 indices."""

        with self._lock:
            parts = []
            for key in sorted(self._side_index):
                indices = self._side_index[key]
                parts.append(key + SIDE_INDEX_COUNT.pack(len(indices)))
                parts.extend(RECORD_INDEX.pack(index) for index in indices)

        return b"".join(parts)

    def _side_index_size(self) -> int:
        return sum(
            DIGEST_SIZE + SIDE_INDEX_COUNT.size + RECORD_INDEX.size * len(indices)
            for indices in self._side_index.values()
        )

    def seal_block(self, now: int | None = None) -> Block | None:
        """Seals all pending records into a new block signed by the next authority in round-robin order and linked to
        its predecessor. Returns `None`, sealing nothing, when no record is pending."""

        with self._lock:
            if not self._pending:
                return None
            if self._closed:
                raise LedgerClosed()

            height = len(self._blocks)
            sealer = self.authorities[height % len(self.authorities)]
            sealed_at = now if now is not None else self._clock.now_ns()
            prev_hash = self._blocks[-1].block_hash
            records = [self._records[index] for index in self._pending]

            block = Block(
                height=height,
                prev_hash=prev_hash,
                records=tuple(self._pending),
                sealer_id=sealer,
                sealed_at=sealed_at,
                block_hash=compute_block_hash(height, prev_hash, records, sealer, sealed_at),
            )
            self._write(encode_block(block))
            self._apply_block(block)

        logger.debug(f"sealed block {height} with {len(block.records)} records by {sealer}")
        return block

    def verify_chain(self) -> ChainStatus:
        """Recomputes every block hash and link and checks each sealer against the round-robin rotation. Corruption is
        reported as the first broken height."""

        with self._lock:
            blocks = list(self._blocks)
            records = list(self._records)

        expected_prev = ZERO_HASH
        for block in blocks:
            sealed = [records[index] for index in block.records if index < len(records)]
            if len(sealed) != len(block.records) or block.prev_hash != expected_prev:
                return ChainStatus(broken_at=block.height)
            if block.sealer_id != self.authorities[block.height % len(self.authorities)]:
                logger.warning(f"block {block.height} sealed by {block.sealer_id} out of turn")
                return ChainStatus(broken_at=block.height)

            block_hash = compute_block_hash(block.height, block.prev_hash, sealed, block.sealer_id, block.sealed_at)
            if block_hash != block.block_hash:
                return ChainStatus(broken_at=block.height)

            expected_prev = block.block_hash

        return ChainStatus()

    def storage_report(self, replica_count: int) -> StorageReport:
        """Byte footprint of one replica (journal bytes plus the serialized side index) and of `replica_count`."""

        if replica_count < 1:
            raise InvalidReplicaCount()

        with self._lock:
            one_replica = self._journal_bytes + self._side_index_size()
            record_count = len(self._records)
            block_count = len(self._blocks)

        return StorageReport(
            record_count=record_count,
            block_count=block_count,
            ledger_bytes_one_replica=one_replica,
            replica_count=replica_count,
            total_bytes=one_replica * replica_count,
        )

    def close(self) -> None:
        """Finalizes the ledger: later writes raise `LedgerClosed`."""

        with self._lock:
            self._closed = True
            if self._file is not None:
                self._file.close()
                self._file = None


def verify_journal(path: pathlib.Path, authorities: list[str] | None = None) -> ChainStatus:
    """Replays a persisted journal and checks its chain against the authority set it was sealed under. Structural
    damage, a torn last entry included, is reported at the height of the block region that holds it."""

    try:
        ledger = Ledger(path, authorities=authorities, read_only=True)
    except JournalCorrupted as exc:
        logger.warning(f"ledger journal {path} is corrupted: {exc}")
        return ChainStatus(broken_at=exc.height)

    return ledger.verify_chain()


def dump_journal(path: pathlib.Path) -> Iterator[str]:
    """Renders a journal as human-readable lines, one per entry."""

    data = path.read_bytes()
    yield f"journal {path} version {LEDGER_FORMAT_VERSION} bytes {len(data)}"

    for offset, entry in iter_journal(data):
        if isinstance(entry, LedgerRecord):
            yield (
                f"@{offset} RECORD index={entry.index} kind={entry.kind.name} submitted_at={entry.submitted_at} "
                f"key={record_key(entry).hex()} payload_bytes={len(entry.payload)}"
            )
        else:
            yield (
                f"@{offset} BLOCK height={entry.height} sealer={entry.sealer_id} sealed_at={entry.sealed_at} "
                f"records={list(entry.records)} prev={entry.prev_hash.hex()} hash={entry.block_hash.hex()}"
            )
