"""Storage benchmark harness: encodings, persisted chain, rows, and verdicts."""

import hashlib

import pytest

from biovault.bench import (
    CSV_HEADER,
    BenchRow,
    BenchSpec,
    PersistedChain,
    bench_once,
    bench_tps,
    read_csv,
    run_bench,
    verdict_rows,
    write_csv,
)
from biovault.ledger import GENESIS_HASH, TransactionRecord, encode_record

SMALL_SPEC = BenchSpec(sizes=(64, 4096), reps=2, tps_transactions=5, seed=0)


def _record(height=0, previous=GENESIS_HASH, payload=None):
    return TransactionRecord(
        sender_address=b"\x01" * 20,
        timestamp=0,
        block_number=height,
        data_hash=hashlib.sha256(b"x").digest(),
        nonce=height,
        previous_hash=previous,
        payload=payload,
    )


def test_spec_validation():
    with pytest.raises(ValueError):
        BenchSpec(sizes=(1024,))
    with pytest.raises(ValueError):
        BenchSpec(sizes=(0, 1024))
    with pytest.raises(ValueError):
        BenchSpec(reps=0)
    with pytest.raises(ValueError):
        BenchSpec(tps_transactions=0)


def test_persisted_chain_roundtrips_records(tmp_path):
    with PersistedChain(tmp_path / "chain.log") as pchain:
        first = _record(0)
        h1 = pchain.append(first)
        second = _record(1, previous=h1, payload=b"abc")
        pchain.append(second)
        assert pchain.height == 2
        assert pchain.read_encoded(0) == encode_record(first)
        assert pchain.read_encoded(1) == encode_record(second)
        # reads seek back; appending afterwards must still extend the end
        third = _record(2, previous=pchain.chain.tip)
        pchain.append(third)
        assert pchain.read_encoded(2) == encode_record(third)
        assert pchain.read_encoded(0) == encode_record(first)


def test_persisted_chain_file_is_hex_lines(tmp_path):
    path = tmp_path / "chain.log"
    with PersistedChain(path) as pchain:
        pchain.append(_record(0))
    lines = path.read_text().splitlines()
    assert len(lines) == 1
    assert bytes.fromhex(lines[0]) == encode_record(_record(0))


def test_bench_once_row_schema_and_encoding_sizes(tmp_path):
    rows = bench_once(tmp_path / "cid", "cid", 256, 0, seed=1)
    by_metric = {r.metric: r for r in rows}
    assert set(by_metric) == {"store_seconds", "retrieve_seconds", "encoding_bytes"}
    for r in rows:
        assert r.mode == "cid"
        assert r.dimension == "payload_bytes"
        assert r.value == "256"
        assert r.rep == 0
    assert by_metric["encoding_bytes"].measure == 108.0
    assert by_metric["store_seconds"].unit == "s"
    assert by_metric["encoding_bytes"].unit == "bytes"

    rows = bench_once(tmp_path / "onchain", "onchain", 256, 0, seed=1)
    by_metric = {r.metric: r for r in rows}
    assert by_metric["encoding_bytes"].measure == 108.0 + 8.0 + 256.0


def test_bench_once_requires_fresh_directory(tmp_path):
    bench_once(tmp_path / "d", "cid", 64, 0, seed=0)
    with pytest.raises(FileExistsError):
        bench_once(tmp_path / "d", "cid", 64, 0, seed=0)


def test_bench_tps_row(tmp_path):
    row = bench_tps(tmp_path / "t", "onchain", 128, n_tx=4, rep=1, seed=0)
    assert row.mode == "onchain"
    assert row.metric == "tps"
    assert row.value == "128"
    assert row.rep == 1
    assert row.unit == "tx_per_s"
    assert row.measure > 0.0


def test_run_bench_produces_full_grid_and_verdicts(tmp_path):
    rows = run_bench(SMALL_SPEC, tmp_path)
    data = [r for r in rows if r.mode in ("cid", "onchain")]
    verdicts = [r for r in rows if r.mode == "summary"]
    # 2 sizes x 2 modes x 2 reps x 3 metrics, plus 2 sizes x 2 modes x 2 reps tps
    assert len([r for r in data if r.metric != "tps"]) == 24
    assert len([r for r in data if r.metric == "tps"]) == 8
    names = {r.metric for r in verdicts}
    assert names == {
        "cid_encoding_constant",
        "onchain_encoding_linear",
        "cid_roundtrip_not_slower_at_largest",
        "tps_small_ge_large_cid",
        "tps_small_ge_large_onchain",
    }
    for r in verdicts:
        assert r.dimension == "claim"
        assert r.rep == -1
        assert r.unit == "bool"
        assert r.measure in (0.0, 1.0)
    # the encoding claims are deterministic; timing claims depend on the host
    by_name = {r.metric: r.measure for r in verdicts}
    assert by_name["cid_encoding_constant"] == 1.0
    assert by_name["onchain_encoding_linear"] == 1.0


def test_verdict_rows_detect_broken_encodings():
    good = [
        BenchRow("cid", "encoding_bytes", "payload_bytes", "64", 0, 108.0, "bytes"),
        BenchRow("cid", "encoding_bytes", "payload_bytes", "4096", 0, 108.0, "bytes"),
        BenchRow("onchain", "encoding_bytes", "payload_bytes", "64", 0, 180.0, "bytes"),
        BenchRow("onchain", "encoding_bytes", "payload_bytes", "4096", 0, 4212.0, "bytes"),
    ]
    timing = [
        BenchRow(mode, metric, "payload_bytes", value, 0, 1.0, "s")
        for mode in ("cid", "onchain")
        for metric in ("store_seconds", "retrieve_seconds")
        for value in ("64", "4096")
    ]
    tps = [
        BenchRow(mode, "tps", "payload_bytes", value, 0, 10.0, "tx_per_s")
        for mode in ("cid", "onchain")
        for value in ("64", "4096")
    ]
    spec = BenchSpec(sizes=(64, 4096), reps=1, tps_transactions=1)
    verdicts = {r.metric: r.measure for r in verdict_rows(good + timing + tps, spec)}
    assert verdicts["cid_encoding_constant"] == 1.0
    assert verdicts["onchain_encoding_linear"] == 1.0

    bloated = [
        BenchRow("cid", "encoding_bytes", "payload_bytes", "64", 0, 108.0, "bytes"),
        BenchRow("cid", "encoding_bytes", "payload_bytes", "4096", 0, 4204.0, "bytes"),
        BenchRow("onchain", "encoding_bytes", "payload_bytes", "64", 0, 999.0, "bytes"),
        BenchRow("onchain", "encoding_bytes", "payload_bytes", "4096", 0, 999.0, "bytes"),
    ]
    verdicts = {r.metric: r.measure for r in verdict_rows(bloated + timing + tps, spec)}
    assert verdicts["cid_encoding_constant"] == 0.0
    assert verdicts["onchain_encoding_linear"] == 0.0


def test_csv_roundtrip(tmp_path):
    rows = [
        BenchRow("cid", "store_seconds", "payload_bytes", "64", 0, 0.012345678901234567, "s"),
        BenchRow("summary", "cid_encoding_constant", "claim", "", -1, 1.0, "bool"),
    ]
    path = tmp_path / "bench.csv"
    write_csv(rows, path)
    header = path.read_text().splitlines()[0]
    assert tuple(header.split(",")) == CSV_HEADER
    assert read_csv(path) == rows


def test_read_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        read_csv(path)
