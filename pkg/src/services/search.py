import pathlib
import string
import struct
import threading
from typing import Iterable

from loguru import logger
import orjson

from src.config.constants.app import INDEX_DOCUMENTS_FILENAME, INDEX_POSTINGS_FILENAME
from src.config.exceptions import DigestMismatch, NotAnchored
from src.schemas.grouping import Digest256
from src.schemas.search import ChunkRecord, Query, SearchHit
from src.services.grouping import group_digest
from src.services.ledger import Ledger
from src.services.logs import KNOWN_LEVELS, TIMESTAMP_PATTERN


DOCUMENT_LENGTH = struct.Struct("<I")
PUNCTUATION = string.punctuation + "“”‘’«»…"


def tokenize(text: str) -> list[str]:
    """Splits on Unicode whitespace, case-folds and strips surrounding punctuation. No stemming."""

    tokens = []
    for word in text.split():
        token = word.casefold().strip(PUNCTUATION)
        if token:
            tokens.append(token)

    return tokens


def line_tokens(line: bytes) -> set[str]:
    return set(tokenize(line.decode("utf-8", errors="replace")))


def line_level(line: bytes) -> str | None:
    """Level field of a canonical line, if the line starts with a timestamp."""

    match = TIMESTAMP_PATTERN.match(line)
    if match is None:
        return None

    fields = line[match.end() :].split(None, 1)
    if not fields:
        return None

    level = fields[0].decode("utf-8", errors="replace")
    return level if level in KNOWN_LEVELS else "OTHER"


def query_terms(query: Query) -> list[str]:
    return [token for term in query.terms for token in tokenize(term)]


def match_record(record: ChunkRecord, query: Query) -> list[int] | None:
    """Applies the query to one chunk by scanning its lines. Returns the matching line positions, or `None` when the
    chunk does not match. Terms are conjunctive over the whole chunk; a matching line holds at least one term (and
    the level, when filtered)."""

    metadata = record.metadata
    if query.time_from is not None or query.time_to is not None:
        if metadata.first_timestamp is None or metadata.last_timestamp is None:
            return None
        if query.time_to is not None and metadata.first_timestamp > query.time_to:
            return None
        if query.time_from is not None and metadata.last_timestamp < query.time_from:
            return None

    terms = set(query_terms(query))
    tokens_per_line = [line_tokens(line) for line in record.lines]
    if terms and not terms.issubset(set().union(*tokens_per_line)):
        return None

    matching = []
    for position, (line, tokens) in enumerate(zip(record.lines, tokens_per_line)):
        if query.level is not None and line_level(line) != query.level.value:
            continue
        if terms and not terms & tokens:
            continue
        matching.append(position)

    if query.level is not None and not matching:
        return None

    return matching


def _sort_key(record: ChunkRecord) -> tuple:
    metadata = record.metadata
    missing = metadata.first_timestamp is None
    return (missing, metadata.first_timestamp or 0, metadata.file, metadata.first_line_index, record.digest.hex)


def brute_force_search(records: Iterable[ChunkRecord], query: Query) -> list[SearchHit]:
    """Reference search by full scan, the oracle for `SearchIndex.search`."""

    hits = []
    for record in sorted(records, key=_sort_key):
        matching = match_record(record, query)
        if matching is not None:
            hits.append(SearchHit(record=record, matching_lines=matching))

    return hits[: query.limit]


class SearchIndex:
    """SearchIndex is a single-directory full-text index over verified chunks: a documents file of length-prefixed
    JSON chunk records, and a postings file mapping tokens to digests that can be rebuilt from the documents alone.\n
    `index_chunk` calls are serialized; searches read a consistent snapshot."""

    def __init__(self, directory: pathlib.Path | None = None) -> None:
        self.directory = directory
        self._lock = threading.Lock()
        self._records: dict[bytes, ChunkRecord] = {}
        self._postings: dict[str, set[bytes]] = {}

        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)
            self._load()

    @property
    def documents_path(self) -> pathlib.Path | None:
        return self.directory / INDEX_DOCUMENTS_FILENAME if self.directory else None

    @property
    def postings_path(self) -> pathlib.Path | None:
        return self.directory / INDEX_POSTINGS_FILENAME if self.directory else None

    def __len__(self) -> int:
        return len(self._records)

    def _load(self) -> None:
        documents_path = self.documents_path
        if documents_path is None or not documents_path.exists():
            return

        data = documents_path.read_bytes()
        offset = 0
        while offset + DOCUMENT_LENGTH.size <= len(data):
            (length,) = DOCUMENT_LENGTH.unpack_from(data, offset)
            start = offset + DOCUMENT_LENGTH.size
            if start + length > len(data):
                logger.warning(f"ignoring torn document at offset {offset} of {documents_path}")
                break
            record = ChunkRecord.model_validate(orjson.loads(data[start : start + length]))
            self._records[record.digest.value] = record
            offset = start + length

        if not self._load_postings():
            self.rebuild_postings()
            self._save_postings()

        logger.info(f"loaded search index {self.directory} with {len(self._records)} chunks")

    def _load_postings(self) -> bool:
        """Loads the postings file if it covers exactly the stored documents."""

        postings_path = self.postings_path
        if postings_path is None or not postings_path.exists():
            return False

        try:
            stored = orjson.loads(postings_path.read_bytes())
        except (OSError, orjson.JSONDecodeError) as exc:
            logger.warning(f"postings file {postings_path} unreadable, rebuilding: {exc}")
            return False

        if stored.get("documents") != len(self._records):
            return False

        self._postings = {
            token: {bytes.fromhex(digest) for digest in digests} for token, digests in stored["postings"].items()
        }
        return True

    def _save_postings(self) -> None:
        postings_path = self.postings_path
        if postings_path is None:
            return

        payload = {
            "documents": len(self._records),
            "postings": {
                token: sorted(digest.hex() for digest in digests) for token, digests in self._postings.items()
            },
        }
        temporary = postings_path.with_suffix(".tmp")
        temporary.write_bytes(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS))
        temporary.replace(postings_path)

    def rebuild_postings(self) -> None:
        """Recomputes the postings from the stored documents."""

        postings: dict[str, set[bytes]] = {}
        for digest, record in self._records.items():
            for line in record.lines:
                for token in line_tokens(line):
                    postings.setdefault(token, set()).add(digest)
        self._postings = postings

    def index_chunk(self, record: ChunkRecord, ledger: Ledger | None = None, persist: bool = True) -> None:
        """Stores a self-verifying chunk and posts its tokens. Re-indexing a digest is a no-op. With a ledger, the
        digest must be anchored there."""

        if not record.lines or group_digest(record.lines) != record.digest:
            raise DigestMismatch(f"chunk {record.digest.hex} does not match its lines")
        if ledger is not None and ledger.contains(record.digest) is None:
            raise NotAnchored(f"chunk {record.digest.hex} is not anchored in the ledger")

        with self._lock:
            if record.digest.value in self._records:
                return

            self._records[record.digest.value] = record
            for line in record.lines:
                for token in line_tokens(line):
                    self._postings.setdefault(token, set()).add(record.digest.value)

            documents_path = self.documents_path
            if documents_path is not None:
                document = orjson.dumps(record.model_dump(mode="json"))
                with documents_path.open("ab") as file_:
                    file_.write(DOCUMENT_LENGTH.pack(len(document)) + document)
                if persist:
                    self._save_postings()

    def index_chunks(self, records: Iterable[ChunkRecord], ledger: Ledger | None = None) -> int:
        """Indexes several chunks, writing the postings file once. Returns the number of records given."""

        count = 0
        for record in records:
            self.index_chunk(record, ledger, persist=False)
            count += 1

        with self._lock:
            self._save_postings()

        return count

    def get_by_hash(self, digest: Digest256) -> ChunkRecord | None:
        with self._lock:
            return self._records.get(digest.value)

    def records(self) -> list[ChunkRecord]:
        with self._lock:
            return list(self._records.values())

    def search(self, query: Query) -> list[SearchHit]:
        """Chunks holding every query term and satisfying the filters, earliest first, at most `query.limit`."""

        terms = query_terms(query)

        with self._lock:
            if terms:
                candidates = set.intersection(*(self._postings.get(term, set()) for term in terms))
                records = [self._records[digest] for digest in candidates]
            else:
                records = list(self._records.values())

        hits = []
        for record in sorted(records, key=_sort_key):
            matching = match_record(record, query)
            if matching is None:
                continue
            hits.append(SearchHit(record=record, matching_lines=matching))
            if len(hits) == query.limit:
                break

        return hits
