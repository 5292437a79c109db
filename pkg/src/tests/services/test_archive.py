import os
import pathlib
import secrets

import pytest

from src.config.exceptions import ArchiveNotFound, AuthenticationFailure, InvalidKey
from src.schemas.archive import ArchiveKey, ContentAddress
from src.schemas.grouping import Digest256
from src.services.archive import ArchiveStore, generate_key, load_key, open_blob, seal_blob, write_key


@pytest.fixture
def store(tmp_path: pathlib.Path) -> ArchiveStore:
    return ArchiveStore(tmp_path / "archive")


@pytest.fixture
def key() -> ArchiveKey:
    return generate_key()


@pytest.mark.parametrize("size", [0, 1, 4096, 1 << 20])
def test_put_get_round_trip(store: ArchiveStore, key: ArchiveKey, size: int) -> None:
    """Tests that any payload, empty and 1 MiB included, comes back unchanged."""

    plaintext = secrets.token_bytes(size)

    address = store.put(plaintext, key)

    assert store.get(address, key) == plaintext
    assert store.verify_address(address)
    assert address.size > size


def test_get_wrong_key(store: ArchiveStore, key: ArchiveKey) -> None:
    address = store.put(b"secret log lines", key)

    with pytest.raises(AuthenticationFailure):
        store.get(address, generate_key())


def test_get_missing(store: ArchiveStore, key: ArchiveKey) -> None:
    address = ContentAddress(digest=Digest256.of(b"nothing"), size=10)

    with pytest.raises(ArchiveNotFound):
        store.get(address, key)
    assert not store.verify_address(address)
    assert store.find(address.digest) is None


def test_verify_address_detects_flip(store: ArchiveStore, key: ArchiveKey) -> None:
    """Tests that a single flipped bit in a stored blob fails both the address check and decryption."""

    address = store.put(b"x" * 256, key)
    path = store.blob_path(address.digest)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0x01
    path.write_bytes(bytes(blob))

    assert not store.verify_address(address)
    with pytest.raises(AuthenticationFailure):
        store.get(address, key)


def test_blob_layout(store: ArchiveStore, key: ArchiveKey) -> None:
    """Tests the fan-out path and that no 16-byte window of the plaintext appears in the stored blob."""

    plaintext = b"2024-01-12T10:00:00Z INFO auth-svc user 42 logged in from 10.0.0.7\n" * 8

    address = store.put(plaintext, key)
    path = store.blob_path(address.digest)
    blob = path.read_bytes()

    assert path.parent.name == address.digest.hex[:2]
    assert path.name == address.digest.hex[2:]
    assert blob.startswith(b"LSAR")
    assert not any(plaintext[start : start + 16] in blob for start in range(len(plaintext) - 15))


def test_put_never_overwrites(store: ArchiveStore, key: ArchiveKey) -> None:
    """Tests that repeated puts of one plaintext produce distinct addresses and leave earlier blobs untouched."""

    first = store.put(b"same", key)
    stored = store.blob_path(first.digest).read_bytes()
    second = store.put(b"same", key)

    assert first != second
    assert store.blob_path(first.digest).read_bytes() == stored
    assert store.find(second.digest) == second


def test_open_blob_rejects_garbage(key: ArchiveKey) -> None:
    with pytest.raises(AuthenticationFailure):
        open_blob(b"LS", key)
    with pytest.raises(AuthenticationFailure):
        open_blob(b"XXXX" + seal_blob(b"a", key)[4:], key)


def test_load_key_formats(tmp_path: pathlib.Path) -> None:
    """Tests that raw and hex key files load to the same key."""

    material = secrets.token_bytes(32)
    raw_path = tmp_path / "raw.key"
    hex_path = tmp_path / "hex.key"
    raw_path.write_bytes(material)
    hex_path.write_text(f"  {material.hex()}\n")

    raw_key = load_key(raw_path)
    hex_key = load_key(hex_path)

    assert raw_key.key_material.get_secret_value() == material
    assert raw_key == hex_key
    assert material.hex() not in repr(raw_key)


@pytest.mark.parametrize("content", [b"short", b"zz" * 32, b"ab" * 31])
def test_load_key_invalid(tmp_path: pathlib.Path, content: bytes) -> None:
    path = tmp_path / "bad.key"
    path.write_bytes(content)

    with pytest.raises(InvalidKey):
        load_key(path)


def test_write_key(tmp_path: pathlib.Path) -> None:
    """Tests that a written key is owner-only, round trips and is never overwritten."""

    key = generate_key()
    path = tmp_path / "archive.key"

    write_key(key, path)

    assert os.stat(path).st_mode & 0o777 == 0o600
    assert load_key(path) == key
    with pytest.raises(FileExistsError):
        write_key(generate_key(), path)
