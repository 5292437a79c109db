import hashlib
import os
import pathlib
import secrets
import struct
import tempfile

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from loguru import logger
from pydantic import SecretBytes

from src.config.constants.app import ARCHIVE_FORMAT_VERSION, ARCHIVE_KEY_SIZE, ARCHIVE_MAGIC, ARCHIVE_NONCE_SIZE
from src.config.exceptions import ArchiveIOError, ArchiveNotFound, AuthenticationFailure, InvalidKey
from src.schemas.archive import ArchiveKey, ContentAddress
from src.schemas.grouping import Digest256


SUBKEY_INFO = b"logstamp archive v1"
KEY_ID_LENGTH = struct.Struct("<B")


def derive_key_id(key_material: bytes) -> str:
    """Short, non-secret label for a key: the first 8 hex characters of SHA-256 over a domain-separated key."""

    return hashlib.sha256(b"logstamp key id" + key_material).hexdigest()[:8]


def generate_key(key_id: str | None = None) -> ArchiveKey:
    """Creates a fresh random archive key."""

    material = secrets.token_bytes(ARCHIVE_KEY_SIZE)
    return ArchiveKey(key_material=SecretBytes(material), key_id=key_id or derive_key_id(material))


def load_key(path: pathlib.Path, key_id: str | None = None) -> ArchiveKey:
    """Loads a key file holding either 32 raw bytes or 64 hex characters (surrounding whitespace ignored)."""

    try:
        data = path.read_bytes()
    except OSError as exc:
        logger.error(f"error reading key file {path}: {exc}")
        raise

    if len(data) == ARCHIVE_KEY_SIZE:
        material = data
    else:
        try:
            material = bytes.fromhex(data.decode("ascii").strip())
        except (UnicodeDecodeError, ValueError):
            raise InvalidKey(f"key file {path} is neither {ARCHIVE_KEY_SIZE} raw bytes nor hex")
        if len(material) != ARCHIVE_KEY_SIZE:
            raise InvalidKey(f"key file {path} holds {len(material)} bytes, expected {ARCHIVE_KEY_SIZE}")

    return ArchiveKey(key_material=SecretBytes(material), key_id=key_id or derive_key_id(material))


def write_key(key: ArchiveKey, path: pathlib.Path) -> None:
    """Writes the key as hex text, readable only by the owner."""

    descriptor = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
    with os.fdopen(descriptor, "w", encoding="ascii") as file_:
        file_.write(key.key_material.get_secret_value().hex() + "\n")


def _cipher(key: ArchiveKey, nonce: bytes) -> AESGCM:
    """AES-256-GCM under a per-blob subkey derived from the first half of the 24-byte nonce."""

    subkey = HKDF(
        algorithm=hashes.SHA256(), length=ARCHIVE_KEY_SIZE, salt=nonce[: ARCHIVE_NONCE_SIZE // 2], info=SUBKEY_INFO
    ).derive(key.key_material.get_secret_value())

    return AESGCM(subkey)


def _header(key_id: str, nonce: bytes) -> bytes:
    label = key_id.encode("utf-8")
    return ARCHIVE_MAGIC + bytes([ARCHIVE_FORMAT_VERSION]) + KEY_ID_LENGTH.pack(len(label)) + label + nonce


def seal_blob(plaintext: bytes, key: ArchiveKey) -> bytes:
    """Encrypts `plaintext` into the blob layout: magic, version, key id, 24-byte nonce, ciphertext and tag. The whole
    header is authenticated as associated data."""

    nonce = secrets.token_bytes(ARCHIVE_NONCE_SIZE)
    header = _header(key.key_id, nonce)
    ciphertext = _cipher(key, nonce).encrypt(nonce[ARCHIVE_NONCE_SIZE // 2 :], plaintext, header)

    return header + ciphertext


def open_blob(blob: bytes, key: ArchiveKey) -> bytes:
    """Decrypts a blob. Any malformed header, wrong key or corrupted byte raises `AuthenticationFailure`."""

    prefix = len(ARCHIVE_MAGIC) + 1 + KEY_ID_LENGTH.size
    if len(blob) < prefix or blob[: len(ARCHIVE_MAGIC)] != ARCHIVE_MAGIC:
        raise AuthenticationFailure("archive blob has no valid header")
    if blob[len(ARCHIVE_MAGIC)] != ARCHIVE_FORMAT_VERSION:
        raise AuthenticationFailure(f"unsupported archive blob version {blob[len(ARCHIVE_MAGIC)]}")

    (label_length,) = KEY_ID_LENGTH.unpack_from(blob, len(ARCHIVE_MAGIC) + 1)
    header_end = prefix + label_length + ARCHIVE_NONCE_SIZE
    if len(blob) < header_end:
        raise AuthenticationFailure("archive blob header is truncated")

    nonce = blob[header_end - ARCHIVE_NONCE_SIZE : header_end]
    try:
        return _cipher(key, nonce).decrypt(nonce[ARCHIVE_NONCE_SIZE // 2 :], blob[header_end:], blob[:header_end])
    except InvalidTag:
        raise AuthenticationFailure("archive blob failed authentication: wrong key or corrupted blob")


class ArchiveStore:
    """ArchiveStore is an encrypted content-addressed blob store: each blob is stored once, under a two-level hex
    fan-out path derived from the SHA-256 of its encrypted bytes, and never overwritten."""

    def __init__(self, directory: pathlib.Path) -> None:
        self.directory = directory
        self.directory.mkdir(parents=True, exist_ok=True)

    def blob_path(self, digest: Digest256) -> pathlib.Path:
        hex_digest = digest.hex
        return self.directory / hex_digest[:2] / hex_digest[2:]

    def put(self, plaintext: bytes, key: ArchiveKey) -> ContentAddress:
        """Encrypts and stores `plaintext`, returning its content address. Fresh nonces make every put distinct."""

        blob = seal_blob(plaintext, key)
        address = ContentAddress(digest=Digest256.of(blob), size=len(blob))
        path = self.blob_path(address.digest)

        if path.exists():
            logger.warning(f"archive blob {address} already present, keeping the stored copy")
            return address

        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with tempfile.NamedTemporaryFile(dir=path.parent, prefix=".tmp-", delete=False) as temporary:
                temporary.write(blob)
                temporary.flush()
                os.fsync(temporary.fileno())
            os.replace(temporary.name, path)
        except OSError as exc:
            logger.error(f"error writing archive blob {address}: {exc}")
            raise ArchiveIOError(f"could not store archive blob {address}: {exc}")

        logger.info(f"archived {len(plaintext)} bytes as {address} ({address.size} bytes stored)")
        return address

    def get(self, address: ContentAddress, key: ArchiveKey) -> bytes:
        """Returns the original plaintext stored at `address`."""

        path = self.blob_path(address.digest)
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            raise ArchiveNotFound(f"no archive blob at {address}")
        except OSError as exc:
            logger.error(f"error reading archive blob {address}: {exc}")
            raise

        return open_blob(blob, key)

    def verify_address(self, address: ContentAddress) -> bool:
        """True iff the blob exists and re-hashing it reproduces the address."""

        try:
            blob = self.blob_path(address.digest).read_bytes()
        except OSError:
            return False

        return len(blob) == address.size and hashlib.sha256(blob).digest() == address.digest.value

    def find(self, digest: Digest256) -> ContentAddress | None:
        """Builds the address of a stored blob from its digest alone."""

        path = self.blob_path(digest)
        if not path.exists():
            return None

        return ContentAddress(digest=digest, size=path.stat().st_size)
