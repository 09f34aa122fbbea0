import hashlib
import struct
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from biovault.errors import (
    DuplicateTransaction,
    StaleParent,
    UnknownTransaction,
    UnknownUser,
)
from biovault.ledger import (
    FIXED_ENCODING_LEN,
    GENESIS_HASH,
    Chain,
    TransactionRecord,
    compute_tx_hash,
    decode_record,
    encode_record,
    export_chain_file,
    export_jsonl,
    import_chain_file,
    import_jsonl,
    validate_chain,
)

SENDER = bytes(range(20))
DH = hashlib.sha256(b"data").digest()


def make_record(prev=GENESIS_HASH, *, timestamp=1111, block_number=0, nonce=0, payload=None):
    return TransactionRecord(
        sender_address=SENDER,
        timestamp=timestamp,
        block_number=block_number,
        data_hash=DH,
        nonce=nonce,
        previous_hash=prev,
        payload=payload,
    )


def build_chain(n):
    chain = Chain()
    for i in range(n):
        chain.store_transaction(
            make_record(chain.tip, timestamp=1000 + i, block_number=i, nonce=i)
        )
    return chain


def test_encoding_is_byte_exact():
    record = make_record(timestamp=7, block_number=3, nonce=9)
    expected = (
        SENDER
        + struct.pack(">Q", 7)
        + struct.pack(">Q", 3)
        + DH
        + struct.pack(">Q", 9)
        + GENESIS_HASH
    )
    assert encode_record(record) == expected
    assert len(expected) == FIXED_ENCODING_LEN == 108


def test_payload_extends_encoding():
    payload = b"\x01\x02\x03"
    record = make_record(payload=payload)
    encoded = encode_record(record)
    assert len(encoded) == 108 + 8 + 3
    assert encoded[108:116] == struct.pack(">Q", 3)
    assert encoded[116:] == payload


def test_tx_hash_is_sha256_of_encoding():
    record = make_record()
    assert compute_tx_hash(record) == hashlib.sha256(encode_record(record)).digest()


u64 = st.integers(min_value=0, max_value=2**64 - 1)


@given(
    sender=st.binary(min_size=20, max_size=20),
    timestamp=u64,
    block_number=u64,
    data_hash=st.binary(min_size=32, max_size=32),
    nonce=u64,
    prev=st.binary(min_size=32, max_size=32),
    payload=st.none() | st.binary(max_size=64),
)
def test_decode_inverts_encode(sender, timestamp, block_number, data_hash, nonce, prev, payload):
    record = TransactionRecord(sender, timestamp, block_number, data_hash, nonce, prev, payload)
    assert decode_record(encode_record(record)) == record


@pytest.mark.parametrize("junk", [b"", bytes(107), bytes(109), bytes(116) + b"x"])
def test_decode_rejects_bad_lengths(junk):
    with pytest.raises(ValueError):
        decode_record(junk)


@pytest.mark.parametrize("field", ["timestamp", "block_number", "nonce"])
@pytest.mark.parametrize("value", [-1, 2**64])
def test_u64_fields_are_range_checked(field, value):
    with pytest.raises(ValueError):
        make_record(**{field: value})


def test_field_length_validation():
    with pytest.raises(ValueError):
        TransactionRecord(b"short", 0, 0, DH, 0, GENESIS_HASH)
    with pytest.raises(ValueError):
        TransactionRecord(SENDER, 0, 0, b"short", 0, GENESIS_HASH)


# -- chain behaviour -------------------------------------------------------------


def test_append_moves_tip_and_height():
    chain = Chain()
    assert chain.tip == GENESIS_HASH and chain.height == 0
    record = make_record()
    tx_hash = chain.store_transaction(record)
    assert chain.tip == tx_hash == compute_tx_hash(record)
    assert chain.height == 1


def test_stale_parent_rejected():
    chain = build_chain(2)
    with pytest.raises(StaleParent):
        chain.store_transaction(make_record(GENESIS_HASH))


def test_duplicate_guard():
    # unreachable through the public path (the hash covers previous_hash, which
    # must equal the moving tip), so poke the map to prove the guard holds
    chain = Chain()
    record = make_record()
    chain._transactions[compute_tx_hash(record)] = record
    with pytest.raises(DuplicateTransaction):
        chain.store_transaction(record)


def test_get_transaction_and_probe_count():
    chain = build_chain(3)
    target = chain.hashes()[1]
    assert chain.get_transaction(target).block_number == 1
    assert chain.counters.tx_lookups == 1
    with pytest.raises(UnknownTransaction):
        chain.get_transaction(bytes(32))
    assert chain.counters.tx_lookups == 2


def test_user_index_latest_wins():
    chain = build_chain(2)
    first, second = chain.hashes()
    chain.map_user("alice", first)
    chain.map_user("alice", second)
    assert chain.get_transaction_hash("alice") == second
    assert chain.counters.user_lookups == 1


def test_map_user_requires_known_transaction():
    chain = build_chain(1)
    with pytest.raises(UnknownTransaction):
        chain.map_user("alice", bytes(32))


def test_unknown_user():
    chain = Chain()
    with pytest.raises(UnknownUser):
        chain.get_transaction_hash("nobody")
    assert not chain.has_user("nobody")


# -- validation ---------------------------------------------------------------------


def test_validate_clean_chain():
    report = validate_chain(build_chain(10))
    assert report.ok
    assert report.issues == []


def test_validate_flags_mutation_and_descendants():
    chain = build_chain(6)
    hashes = chain.hashes()
    victim = hashes[2]
    chain._transactions[victim] = replace(chain._transactions[victim], timestamp=999999)
    report = validate_chain(chain)
    assert not report.ok
    flagged = report.flagged_hashes()
    assert victim in flagged
    assert set(hashes[3:]).issubset(flagged)  # everything after is tainted
    assert not flagged & set(hashes[:2])  # ancestors stay clean


def test_validate_payload_mismatch_flags_only_that_record():
    chain = Chain()
    good = b"payload bytes"
    rec1 = TransactionRecord(SENDER, 1, 0, hashlib.sha256(good).digest(), 0, chain.tip, good)
    chain.store_transaction(rec1)
    bad = b"other bytes"
    rec2 = TransactionRecord(SENDER, 2, 1, hashlib.sha256(good).digest(), 1, chain.tip, bad)
    h2 = chain.store_transaction(rec2)
    rec3 = TransactionRecord(SENDER, 3, 2, hashlib.sha256(good).digest(), 2, chain.tip, good)
    chain.store_transaction(rec3)
    report = validate_chain(chain)
    assert report.flagged_hashes() == {h2}
    reasons = [i.reason for i in report.issues]
    assert reasons == ["data_hash does not match the payload digest"]


def test_validate_with_payload_lookup():
    blobs = {}
    chain = Chain()
    data = b"off-chain blob"
    digest = hashlib.sha256(data).digest()
    blobs[digest] = data
    chain.store_transaction(TransactionRecord(SENDER, 1, 0, digest, 0, chain.tip))
    assert validate_chain(chain, payload_lookup=blobs.get).ok
    blobs[digest] = b"swapped"
    report = validate_chain(chain, payload_lookup=blobs.get)
    assert len(report.issues) == 1


# -- export / import -------------------------------------------------------------------


def test_jsonl_roundtrip_reproduces_tip(tmp_path):
    chain = build_chain(5)
    chain.store_transaction(make_record(chain.tip, timestamp=2000, block_number=5, nonce=5, payload=b"p"))
    path = tmp_path / "chain.jsonl"
    export_chain_file(chain, path)
    again = import_chain_file(path)
    assert again.tip == chain.tip
    assert again.height == chain.height
    assert again.records() == chain.records()


def test_import_verifies_recorded_hash():
    chain = build_chain(2)
    lines = export_jsonl(chain).splitlines()
    tampered = lines[1].replace('"timestamp":1001', '"timestamp":1002')
    assert tampered != lines[1]
    with pytest.raises(ValueError, match="hash"):
        import_jsonl([lines[0], tampered])


def test_export_empty_chain_is_empty_string():
    assert export_jsonl(Chain()) == ""
