import datetime as dt


PROJECT_NAME = "logstamp"

# * on-disk formats, all integers little-endian
LEDGER_MAGIC = b"LSTP"
LEDGER_FORMAT_VERSION = 1

ARCHIVE_MAGIC = b"LSAR"
ARCHIVE_FORMAT_VERSION = 1
"""Version 1: HKDF-SHA256 subkey from the first nonce half, AES-256-GCM with the second half, 128-bit tag."""

ARCHIVE_NONCE_SIZE = 24
ARCHIVE_KEY_SIZE = 32

INDEX_DOCUMENTS_FILENAME = "documents.bin"
INDEX_POSTINGS_FILENAME = "postings.json"

DIGEST_SIZE = 32
ZERO_HASH = bytes(DIGEST_SIZE)

DEFAULT_AUTHORITIES = ["authority-0", "authority-1", "authority-2"]
DEFAULT_GENESIS_TIME = dt.datetime(2024, 1, 1, tzinfo=dt.timezone.utc)

DEFAULT_SOURCE_POOL = ["auth-svc", "web-frontend", "billing-svc", "db-proxy", "scheduler", "search-api"]

DEFAULT_CHUNK_SIZE = 5
DEFAULT_MAX_WAIT = dt.timedelta(seconds=60)
DEFAULT_POLL_INTERVAL = dt.timedelta(milliseconds=250)
DEFAULT_SEAL_INTERVAL = dt.timedelta(seconds=1)
DEFAULT_REPLICA_COUNT = 3
DEFAULT_MAX_PENDING_GROUPS = 1024

TAIL_READ_SIZE = 1 << 20

BENCH_CHUNK_SIZES = [1, 5, 10, 20]
BENCH_LINE_COUNT = 100_000
BENCH_CSV_COLUMNS = ["chunk_size", "record_count", "ledger_bytes", "total_bytes", "ingest_ms", "verify_ms"]

INTACT_MESSAGE = "Log file is intact"
MODIFIED_MESSAGE = "Log file has been modified"
