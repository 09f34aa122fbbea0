"""Append-only simulated ledger keyed by transaction hash.

One transaction per block. Each record commits to its parent through
previous_hash, so the whole history is fixed by the tip hash. Records carry a
data_hash digest that anchors an off-chain payload (the payload's digest doubles
as its content address in the store); a record may instead embed the payload
on-chain, which exists only to measure what that costs.

Canonical record encoding (hashed with SHA-256), byte-exact:

    sender_address   20 bytes
    timestamp         8 bytes, unsigned big-endian
    block_number      8 bytes, unsigned big-endian
    data_hash        32 bytes
    nonce             8 bytes, unsigned big-endian
    previous_hash    32 bytes
    [payload]         8-byte unsigned big-endian length + raw bytes,
                      present only when a payload is embedded

The fixed-size portion is always 108 bytes. Genesis records use 32 zero bytes
as previous_hash.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import (
    DuplicateTransaction,
    StaleParent,
    UnknownTransaction,
    UnknownUser,
)

GENESIS_HASH = bytes(32)
FIXED_ENCODING_LEN = 108
_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class TransactionRecord:
    sender_address: bytes
    timestamp: int
    block_number: int
    data_hash: bytes
    nonce: int
    previous_hash: bytes
    payload: bytes | None = None

    def __post_init__(self) -> None:
        if len(self.sender_address) != 20:
            raise ValueError("sender_address must be 20 bytes")
        if len(self.data_hash) != 32:
            raise ValueError("data_hash must be 32 bytes")
        if len(self.previous_hash) != 32:
            raise ValueError("previous_hash must be 32 bytes")
        for name in ("timestamp", "block_number", "nonce"):
            value = getattr(self, name)
            if not 0 <= value <= _U64_MAX:
                raise ValueError(f"{name} out of unsigned 64-bit range: {value}")


def encode_record(record: TransactionRecord) -> bytes:
    """Canonical byte encoding, the exact preimage of the transaction hash."""
    fixed = (
        record.sender_address
        + struct.pack(">Q", record.timestamp)
        + struct.pack(">Q", record.block_number)
        + record.data_hash
        + struct.pack(">Q", record.nonce)
        + record.previous_hash
    )
    if record.payload is None:
        return fixed
    return fixed + struct.pack(">Q", len(record.payload)) + record.payload


def decode_record(data: bytes) -> TransactionRecord:
    """Inverse of encode_record; trailing or missing bytes are rejected."""
    if len(data) < FIXED_ENCODING_LEN:
        raise ValueError(f"encoded record must be at least {FIXED_ENCODING_LEN} bytes")
    sender = data[:20]
    timestamp, block_number = struct.unpack(">QQ", data[20:36])
    data_hash = data[36:68]
    (nonce,) = struct.unpack(">Q", data[68:76])
    previous_hash = data[76:108]
    payload = None
    if len(data) > FIXED_ENCODING_LEN:
        if len(data) < FIXED_ENCODING_LEN + 8:
            raise ValueError("truncated payload length")
        (length,) = struct.unpack(">Q", data[108:116])
        if len(data) != FIXED_ENCODING_LEN + 8 + length:
            raise ValueError("payload length disagrees with the encoding")
        payload = data[116:]
    return TransactionRecord(
        sender_address=sender,
        timestamp=timestamp,
        block_number=block_number,
        data_hash=data_hash,
        nonce=nonce,
        previous_hash=previous_hash,
        payload=payload,
    )


def compute_tx_hash(record: TransactionRecord) -> bytes:
    return hashlib.sha256(encode_record(record)).digest()


@dataclass
class ChainIssue:
    tx_hash: bytes
    height: int
    reason: str


@dataclass
class ValidationReport:
    issues: list[ChainIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def flagged_hashes(self) -> set[bytes]:
        return {issue.tx_hash for issue in self.issues}


@dataclass
class ProbeCounters:
    """Instrumented map-lookup counts, for the constant-cost retrieval evidence."""

    tx_lookups: int = 0
    user_lookups: int = 0


class Chain:
    """In-memory hash-keyed chain with a user -> latest-transaction index."""

    def __init__(self) -> None:
        self._transactions: dict[bytes, TransactionRecord] = {}
        self._order: list[bytes] = []  # append order, oldest first
        self._user_index: dict[str, bytes] = {}
        self.tip: bytes = GENESIS_HASH
        self.height: int = 0
        self.counters = ProbeCounters()

    def store_transaction(self, record: TransactionRecord) -> bytes:
        """Append a record whose previous_hash is the current tip; returns its hash."""
        if record.previous_hash != self.tip:
            raise StaleParent(
                f"record parents {record.previous_hash.hex()} but tip is {self.tip.hex()}"
            )
        tx_hash = compute_tx_hash(record)
        if tx_hash in self._transactions:
            raise DuplicateTransaction(tx_hash.hex())
        self._transactions[tx_hash] = record
        self._order.append(tx_hash)
        self.tip = tx_hash
        self.height += 1
        return tx_hash

    def get_transaction(self, tx_hash: bytes) -> TransactionRecord:
        """One map probe, independent of chain height."""
        self.counters.tx_lookups += 1
        try:
            return self._transactions[tx_hash]
        except KeyError:
            raise UnknownTransaction(tx_hash.hex()) from None

    def map_user(self, user_id: str, tx_hash: bytes) -> None:
        """Point user_id at a stored transaction; a re-map overwrites (latest wins)."""
        if tx_hash not in self._transactions:
            raise UnknownTransaction(tx_hash.hex())
        self._user_index[user_id] = tx_hash

    def get_transaction_hash(self, user_id: str) -> bytes:
        self.counters.user_lookups += 1
        try:
            return self._user_index[user_id]
        except KeyError:
            raise UnknownUser(user_id) from None

    def has_user(self, user_id: str) -> bool:
        return user_id in self._user_index

    def user_ids(self) -> list[str]:
        return list(self._user_index)

    def records(self) -> list[TransactionRecord]:
        return [self._transactions[h] for h in self._order]

    def hashes(self) -> list[bytes]:
        return list(self._order)


def validate_chain(
    chain: Chain,
    payload_lookup=None,
) -> ValidationReport:
    """Re-derive every hash and link from genesis to tip.

    A record fails when its stored key no longer matches its recomputed hash or
    its previous_hash does not match the recomputed hash of its predecessor;
    every record after a failure is flagged too, since nothing downstream of a
    broken link can be trusted. ``payload_lookup(data_hash) -> bytes | None``
    optionally lets data_hash be re-checked against the off-chain payload (or
    the embedded payload when present); payload mismatches flag only the record
    itself.
    """
    report = ValidationReport()
    expected_prev = GENESIS_HASH
    tainted = False
    for height, stored_hash in enumerate(chain._order, start=1):
        record = chain._transactions[stored_hash]
        recomputed = compute_tx_hash(record)
        reasons: list[str] = []
        if tainted:
            reasons.append("descends from an invalid record")
        if recomputed != stored_hash:
            reasons.append("record bytes do not hash to their key")
            tainted = True
        if record.previous_hash != expected_prev:
            reasons.append("previous_hash does not match the recomputed parent")
            tainted = True
        payload = record.payload
        if payload is None and payload_lookup is not None:
            payload = payload_lookup(record.data_hash)
        if payload is not None:
            if hashlib.sha256(payload).digest() != record.data_hash:
                reasons.append("data_hash does not match the payload digest")
        for reason in reasons:
            report.issues.append(ChainIssue(stored_hash, height, reason))
        expected_prev = stored_hash
    return report


# -- JSON-lines export / import ----------------------------------------------
#
# One transaction per line, fields in canonical order, digests as lowercase hex.
# Example line (payload null when the record anchors an off-chain payload):
#   {"hash": "...", "sender_address": "...", "timestamp": 0, "block_number": 1,
#    "data_hash": "...", "nonce": 0, "previous_hash": "...", "payload": null}

def export_jsonl(chain: Chain) -> str:
    lines = []
    for tx_hash, record in zip(chain._order, chain.records()):
        doc = {
            "hash": tx_hash.hex(),
            "sender_address": record.sender_address.hex(),
            "timestamp": record.timestamp,
            "block_number": record.block_number,
            "data_hash": record.data_hash.hex(),
            "nonce": record.nonce,
            "previous_hash": record.previous_hash.hex(),
            "payload": record.payload.hex() if record.payload is not None else None,
        }
        lines.append(json.dumps(doc, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


def record_to_jsonl_line(tx_hash: bytes, record: TransactionRecord) -> str:
    doc = {
        "hash": tx_hash.hex(),
        "sender_address": record.sender_address.hex(),
        "timestamp": record.timestamp,
        "block_number": record.block_number,
        "data_hash": record.data_hash.hex(),
        "nonce": record.nonce,
        "previous_hash": record.previous_hash.hex(),
        "payload": record.payload.hex() if record.payload is not None else None,
    }
    return json.dumps(doc, separators=(",", ":"))


def import_jsonl(lines: Iterable[str]) -> Chain:
    """Rebuild a chain from exported lines, verifying every recorded hash."""
    chain = Chain()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        record = TransactionRecord(
            sender_address=bytes.fromhex(doc["sender_address"]),
            timestamp=doc["timestamp"],
            block_number=doc["block_number"],
            data_hash=bytes.fromhex(doc["data_hash"]),
            nonce=doc["nonce"],
            previous_hash=bytes.fromhex(doc["previous_hash"]),
            payload=bytes.fromhex(doc["payload"]) if doc.get("payload") else None,
        )
        tx_hash = chain.store_transaction(record)
        if tx_hash != bytes.fromhex(doc["hash"]):
            raise ValueError(f"line {lineno}: recorded hash does not match the record")
    return chain


def export_chain_file(chain: Chain, path: str | Path) -> None:
    Path(path).write_text(export_jsonl(chain))


def import_chain_file(path: str | Path) -> Chain:
    with open(path) as fh:
        return import_jsonl(fh)
