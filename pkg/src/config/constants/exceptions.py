from typing import NamedTuple


class Error(NamedTuple):
    """Error encapsulates an error's type, default message and the CLI exit code it maps to."""

    type_: str
    message: str
    exit_code: int


EXIT_SUCCESS = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3

ERROR_MAPPING = {
    "parse_error": Error("parse_error", "Log line could not be parsed.", EXIT_USAGE),
    "sink_error": Error("sink_error", "Could not write generated lines.", EXIT_IO),
    "empty_group": Error("empty_group", "Cannot digest an empty group.", EXIT_USAGE),
    "ledger_closed": Error("ledger_closed", "Ledger is closed for writes.", EXIT_IO),
    "ledger_unavailable": Error("ledger_unavailable", "Ledger is temporarily unavailable.", EXIT_IO),
    "index_out_of_range": Error("index_out_of_range", "Ledger index is out of range.", EXIT_USAGE),
    "invalid_replica_count": Error("invalid_replica_count", "Replica count must be at least 1.", EXIT_USAGE),
    "journal_corrupted": Error("journal_corrupted", "Ledger journal is corrupted.", EXIT_VERIFICATION_FAILED),
    "file_vanished": Error("file_vanished", "Log file vanished during ingestion.", EXIT_IO),
    "truncation_detected": Error("truncation_detected", "Log file was truncated while being tailed.", EXIT_IO),
    "manifest_mismatch": Error("manifest_mismatch", "Manifest does not match the log file.", EXIT_USAGE),
    "archive_not_found": Error("archive_not_found", "No archive blob at that address.", EXIT_IO),
    "authentication_failure": Error(
        "authentication_failure", "Archive blob failed authentication.", EXIT_VERIFICATION_FAILED
    ),
    "archive_io_error": Error("archive_io_error", "Archive store could not be written.", EXIT_IO),
    "digest_mismatch": Error("digest_mismatch", "Chunk digest does not match its lines.", EXIT_VERIFICATION_FAILED),
    "not_anchored": Error("not_anchored", "Chunk digest is not anchored in the ledger.", EXIT_VERIFICATION_FAILED),
    "invalid_key": Error("invalid_key", "Archive key file is invalid.", EXIT_USAGE),
    "log_file_not_found": Error("log_file_not_found", "Log file not found.", EXIT_IO),
    "bench_aborted": Error("bench_aborted", "Benchmark run aborted.", EXIT_IO),
    "unknown_error": Error("unknown_error", "An unknown error occured.", EXIT_IO),
}
