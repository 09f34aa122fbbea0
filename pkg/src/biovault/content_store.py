"""Content-addressed blob store with an optional authenticated-encryption envelope.

Objects are addressed by the SHA-256 of the exact bytes on disk, written as
``cid-sha256:<64 lowercase hex digits>``. Identical bytes therefore share one
stored object, and every read re-hashes the bytes so silent corruption cannot
pass as a hit.

Encrypted objects are stored as a framed AES-GCM envelope and addressed by the
digest of the envelope itself (not the plaintext), so the same plaintext stored
twice yields two different ids because the nonce is fresh.

Envelope layout, byte-exact::

    offset  size  field
    0       4     magic, ASCII "FBT1"
    4       12    AES-GCM nonce
    16      n     ciphertext
    16+n    16    AES-GCM authentication tag

The ciphertext+tag region is exactly what AES-GCM emits for the plaintext under
(key, nonce) with no associated data.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import AuthenticationFailed, IntegrityViolation, NotFound, StorageFull

ENVELOPE_MAGIC = b"FBT1"
NONCE_LEN = 12
TAG_LEN = 16
KEY_LEN = 32
_CID_PREFIX = "cid-sha256:"


@dataclass(frozen=True)
class ContentId:
    """Address of a stored object: the SHA-256 digest of its raw bytes."""

    digest: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.digest, bytes) or len(self.digest) != 32:
            raise ValueError("content id digest must be exactly 32 bytes")

    @classmethod
    def for_bytes(cls, data: bytes) -> "ContentId":
        return cls(hashlib.sha256(data).digest())

    @classmethod
    def parse(cls, text: str) -> "ContentId":
        if not text.startswith(_CID_PREFIX):
            raise ValueError(f"not a content id: {text!r}")
        hexpart = text[len(_CID_PREFIX):]
        if len(hexpart) != 64 or hexpart != hexpart.lower():
            raise ValueError(f"malformed content id: {text!r}")
        return cls(bytes.fromhex(hexpart))

    def __str__(self) -> str:
        return _CID_PREFIX + self.digest.hex()


@dataclass(frozen=True)
class EncryptionKey:
    """32-byte symmetric key. Never serialized by this module."""

    secret: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.secret, bytes) or len(self.secret) != KEY_LEN:
            raise ValueError("encryption key must be exactly 32 bytes")

    def __repr__(self) -> str:  # keep the secret out of logs and tracebacks
        return "EncryptionKey(<redacted>)"


def seal_envelope(plaintext: bytes, key: EncryptionKey, *, nonce: bytes | None = None) -> bytes:
    """Encrypt plaintext into the framed envelope. A fresh nonce is drawn unless given."""
    if nonce is None:
        nonce = os.urandom(NONCE_LEN)
    if len(nonce) != NONCE_LEN:
        raise ValueError("nonce must be 12 bytes")
    sealed = AESGCM(key.secret).encrypt(nonce, plaintext, None)
    return ENVELOPE_MAGIC + nonce + sealed


def open_envelope(envelope: bytes, key: EncryptionKey) -> bytes:
    """Decrypt a framed envelope.

    Raises AuthenticationFailed for anything that is not a well-formed envelope
    sealed under this key, including single-byte tampering anywhere in the
    nonce/ciphertext/tag region.
    """
    if len(envelope) < len(ENVELOPE_MAGIC) + NONCE_LEN + TAG_LEN:
        raise AuthenticationFailed("envelope too short")
    if envelope[:4] != ENVELOPE_MAGIC:
        raise AuthenticationFailed("bad envelope magic")
    nonce = envelope[4:4 + NONCE_LEN]
    body = envelope[4 + NONCE_LEN:]
    try:
        return AESGCM(key.secret).decrypt(nonce, body, None)
    except InvalidTag as exc:
        raise AuthenticationFailed("envelope failed authentication") from exc


class ContentStore:
    """Directory-backed content-addressed store.

    Layout: ``<root>/objects/<64-hex-digest>``, one file per object. Writes go
    through a temp file in the same directory followed by an atomic rename, so
    a crash can never leave a half-written object under a valid name.
    """

    def __init__(self, root: str | Path, *, max_bytes: int | None = None) -> None:
        self.root = Path(root)
        self.objects_dir = self.root / "objects"
        self.objects_dir.mkdir(parents=True, exist_ok=True)
        self.max_bytes = max_bytes
        self.get_count = 0  # instrumentation: number of get() calls served

    # -- plaintext interface ------------------------------------------------

    def put(self, data: bytes) -> ContentId:
        """Store bytes, returning their content id. Idempotent for equal bytes."""
        cid = ContentId.for_bytes(data)
        self._write_object(cid, data)
        return cid

    def get(self, cid: ContentId) -> bytes:
        """Fetch bytes by id, re-verifying the digest before returning them."""
        path = self._object_path(cid)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no object {cid}") from None
        self.get_count += 1
        actual = hashlib.sha256(data).digest()
        if not hmac.compare_digest(actual, cid.digest):
            raise IntegrityViolation(f"object {cid} hashes to sha256:{actual.hex()}")
        return data

    # -- encrypted interface ------------------------------------------------

    def put_encrypted(self, plaintext: bytes, key: EncryptionKey) -> ContentId:
        """Seal plaintext and store the envelope; the id addresses the envelope."""
        return self.put(seal_envelope(plaintext, key))

    def get_decrypted(self, cid: ContentId, key: EncryptionKey) -> bytes:
        """Fetch an envelope by id and return its authenticated plaintext."""
        return open_envelope(self.get(cid), key)

    # -- bookkeeping ----------------------------------------------------------

    def contains(self, cid: ContentId) -> bool:
        return self._object_path(cid).exists()

    def object_count(self) -> int:
        return sum(1 for _ in self.objects_dir.iterdir())

    def total_bytes(self) -> int:
        return sum(p.stat().st_size for p in self.objects_dir.iterdir())

    def discard(self, cid: ContentId) -> None:
        """Remove one object if present. Used to undo a failed multi-step write."""
        try:
            self._object_path(cid).unlink()
        except FileNotFoundError:
            pass

    # -- internals ------------------------------------------------------------

    def _object_path(self, cid: ContentId) -> Path:
        return self.objects_dir / cid.digest.hex()

    def _write_object(self, cid: ContentId, data: bytes) -> None:
        path = self._object_path(cid)
        if path.exists():
            return  # dedup: identical bytes are already present under this id
        if self.max_bytes is not None and self.total_bytes() + len(data) > self.max_bytes:
            raise StorageFull(
                f"storing {len(data)} bytes would exceed the {self.max_bytes}-byte cap"
            )
        fd, tmp_name = tempfile.mkstemp(dir=self.objects_dir, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except FileNotFoundError:
                pass
            raise
