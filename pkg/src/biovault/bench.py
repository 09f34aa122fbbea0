"""Storage benchmarks: off-chain content addressing against on-chain payloads.

Both modes persist the chain to disk and re-read it during retrieval, so the
comparison never gives one side a free in-memory pass. In cid mode the record
stays at its fixed 108-byte encoding and the data lives in the content store;
in onchain mode the data rides inside the record's payload, growing the
encoding by 8 bytes of length prefix plus the data itself.

Every repetition runs against a fresh directory (asserted by starting from
height zero), timings use the monotonic performance counter, and aggregate
claims are medians so a single slow rep cannot flip a verdict. Rows follow
one CSV schema:

    mode,metric,dimension,value,rep,measure,unit

Verdict rows carry dimension "claim", a rep of -1, and a 0/1 measure with
unit "bool".
"""

from __future__ import annotations

import csv
import hashlib
import io
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .content_store import ContentId, ContentStore
from .ledger import (
    GENESIS_HASH,
    Chain,
    TransactionRecord,
    decode_record,
    encode_record,
)

MODES = ("cid", "onchain")


@dataclass(frozen=True)
class BenchSpec:
    sizes: tuple[int, ...] = (1024, 1048576)
    reps: int = 5
    tps_transactions: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.sizes) < 2:
            raise ValueError("need at least two payload sizes to compare")
        if any(s < 1 for s in self.sizes):
            raise ValueError("payload sizes must be positive")
        if self.reps < 1 or self.tps_transactions < 1:
            raise ValueError("reps and tps_transactions must be positive")


@dataclass(frozen=True)
class BenchRow:
    mode: str
    metric: str
    dimension: str
    value: str
    rep: int
    measure: float
    unit: str


class PersistedChain:
    """A chain whose appends also land in a line-per-record log file.

    Retrieval goes back through the file (seek, read, decode), so benchmarks
    measure an actual disk round trip rather than a dict lookup.
    """

    def __init__(self, path: str | Path) -> None:
        self.chain = Chain()
        self.path = Path(path)
        self._offsets: list[int] = []
        self._fh = open(self.path, "a+b")

    def append(self, record: TransactionRecord) -> bytes:
        tx_hash = self.chain.store_transaction(record)
        self._fh.seek(0, io.SEEK_END)
        self._offsets.append(self._fh.tell())
        self._fh.write((encode_record(record).hex() + "\n").encode("ascii"))
        self._fh.flush()
        return tx_hash

    def read_encoded(self, height: int) -> bytes:
        self._fh.seek(self._offsets[height])
        return bytes.fromhex(self._fh.readline().decode("ascii").strip())

    @property
    def height(self) -> int:
        return self.chain.height

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "PersistedChain":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _sender(mode: str) -> bytes:
    return hashlib.sha256(f"bench-{mode}".encode()).digest()[:20]


def _record_for(mode: str, data: bytes, height: int, previous: bytes) -> TransactionRecord:
    digest = hashlib.sha256(data).digest()
    return TransactionRecord(
        sender_address=_sender(mode),
        timestamp=0,
        block_number=height,
        data_hash=digest,
        nonce=height,
        previous_hash=previous,
        payload=data if mode == "onchain" else None,
    )


def bench_once(root: str | Path, mode: str, size: int, rep: int, seed: int) -> list[BenchRow]:
    """Store one payload, read it back, report timings and encoding size."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=False)
    rng = np.random.default_rng([seed, size, rep, MODES.index(mode)])
    data = rng.bytes(size)
    with PersistedChain(root / "chain.log") as pchain:
        if pchain.height != 0:
            raise RuntimeError("benchmark repetition must start from a fresh chain")
        store = ContentStore(root / "store")
        started = time.perf_counter()
        if mode == "cid":
            cid = store.put(data)
            record = _record_for(mode, data, 0, GENESIS_HASH)
            if record.data_hash != cid.digest:
                raise RuntimeError("content id disagrees with the record digest")
        else:
            record = _record_for(mode, data, 0, GENESIS_HASH)
        pchain.append(record)
        store_seconds = time.perf_counter() - started
        encoding_bytes = len(encode_record(record))

        started = time.perf_counter()
        decoded = decode_record(pchain.read_encoded(0))
        if mode == "cid":
            out = store.get(ContentId(decoded.data_hash))
        else:
            out = decoded.payload
        retrieve_seconds = time.perf_counter() - started
    if out != data:
        raise RuntimeError("retrieved payload does not match what was stored")
    size_str = str(size)
    return [
        BenchRow(mode, "store_seconds", "payload_bytes", size_str, rep, store_seconds, "s"),
        BenchRow(mode, "retrieve_seconds", "payload_bytes", size_str, rep, retrieve_seconds, "s"),
        BenchRow(mode, "encoding_bytes", "payload_bytes", size_str, rep, float(encoding_bytes), "bytes"),
    ]


def bench_tps(
    root: str | Path, mode: str, size: int, n_tx: int, rep: int, seed: int
) -> BenchRow:
    """Sustained append throughput at one payload size."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=False)
    rng = np.random.default_rng([seed, size, rep, 100 + MODES.index(mode)])
    payloads = [rng.bytes(size) for _ in range(n_tx)]
    with PersistedChain(root / "chain.log") as pchain:
        if pchain.height != 0:
            raise RuntimeError("benchmark repetition must start from a fresh chain")
        store = ContentStore(root / "store")
        started = time.perf_counter()
        previous = GENESIS_HASH
        for height, data in enumerate(payloads):
            if mode == "cid":
                store.put(data)
            record = _record_for(mode, data, height, previous)
            previous = pchain.append(record)
        elapsed = time.perf_counter() - started
    return BenchRow(mode, "tps", "payload_bytes", str(size), rep, n_tx / elapsed, "tx_per_s")


def _median(rows: list[BenchRow], mode: str, metric: str, size: int) -> float:
    values = [
        r.measure
        for r in rows
        if r.mode == mode and r.metric == metric and r.value == str(size)
    ]
    if not values:
        raise ValueError(f"no rows for {mode}/{metric}/{size}")
    return statistics.median(values)


def verdict_rows(rows: list[BenchRow], spec: BenchSpec) -> list[BenchRow]:
    """Aggregate claims computed from the measured rows."""
    def claim(name: str, holds: bool) -> BenchRow:
        return BenchRow("summary", name, "claim", "", -1, 1.0 if holds else 0.0, "bool")

    cid_encodings = {
        r.measure for r in rows if r.mode == "cid" and r.metric == "encoding_bytes"
    }
    onchain_linear = all(
        _median(rows, "onchain", "encoding_bytes", size) == 108 + 8 + size
        for size in spec.sizes
    )
    largest = max(spec.sizes)
    smallest = min(spec.sizes)
    cid_roundtrip = (
        _median(rows, "cid", "store_seconds", largest)
        + _median(rows, "cid", "retrieve_seconds", largest)
    ) <= (
        _median(rows, "onchain", "store_seconds", largest)
        + _median(rows, "onchain", "retrieve_seconds", largest)
    )
    out = [
        claim("cid_encoding_constant", cid_encodings == {108.0}),
        claim("onchain_encoding_linear", onchain_linear),
        claim("cid_roundtrip_not_slower_at_largest", cid_roundtrip),
    ]
    for mode in MODES:
        holds = _median(rows, mode, "tps", smallest) >= _median(rows, mode, "tps", largest)
        out.append(claim(f"tps_small_ge_large_{mode}", holds))
    return out


def run_bench(spec: BenchSpec, workdir: str | Path) -> list[BenchRow]:
    workdir = Path(workdir)
    rows: list[BenchRow] = []
    for size in spec.sizes:
        for mode in MODES:
            for rep in range(spec.reps):
                rows.extend(
                    bench_once(workdir / f"{mode}-{size}-{rep}", mode, size, rep, spec.seed)
                )
    for size in (min(spec.sizes), max(spec.sizes)):
        for mode in MODES:
            for rep in range(spec.reps):
                rows.append(
                    bench_tps(
                        workdir / f"tps-{mode}-{size}-{rep}",
                        mode,
                        size,
                        spec.tps_transactions,
                        rep,
                        spec.seed,
                    )
                )
    rows.extend(verdict_rows(rows, spec))
    return rows


CSV_HEADER = ("mode", "metric", "dimension", "value", "rep", "measure", "unit")


def write_csv(rows: list[BenchRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow(
                [r.mode, r.metric, r.dimension, r.value, r.rep, repr(r.measure), r.unit]
            )


def read_csv(path: str | Path) -> list[BenchRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected benchmark CSV header: {header}")
        return [
            BenchRow(mode, metric, dimension, value, int(rep), float(measure), unit)
            for mode, metric, dimension, value, rep, measure, unit in reader
        ]
