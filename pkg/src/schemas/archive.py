from pydantic import BaseModel, ConfigDict, Field, SecretBytes, field_validator

from src.config.constants.app import ARCHIVE_KEY_SIZE
from src.schemas.grouping import Digest256


class ContentAddress(BaseModel):
    """ContentAddress names an archived blob by the SHA-256 of its stored (encrypted) bytes."""

    model_config = ConfigDict(frozen=True)

    digest: Digest256
    size: int = Field(ge=0)

    def __str__(self) -> str:
        return self.digest.hex


class ArchiveKey(BaseModel):
    """ArchiveKey is the symmetric archive key. The key material never leaves process memory."""

    model_config = ConfigDict(frozen=True)

    key_material: SecretBytes
    key_id: str = Field(min_length=1, max_length=64)

    @field_validator("key_material")
    def check_key_size(cls, value: SecretBytes) -> SecretBytes:
        if len(value.get_secret_value()) != ARCHIVE_KEY_SIZE:
            raise ValueError(f"archive key must be {ARCHIVE_KEY_SIZE} bytes")

        return value
