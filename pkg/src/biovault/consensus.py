"""Fair-chance miner selection.

A miner is eligible for a round when it clears every resource gate at once:
enough compute and balance, not too many consecutive wins, and bandwidth and
storage usage under their caps (all bounds inclusive). The winner is then drawn
uniformly from the eligible subset by a deterministic generator keyed by the
digest of (round seed || round index), so a seed fixes the whole simulation.

Consecutive-win bookkeeping: the winner's count goes up by one and every other
miner's count resets to zero. Rounds with no eligible miner are skipped and
counted; a skipped round changes no counts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .errors import NoEligibleMiner


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and non-negative, got {value!r}")


@dataclass
class MinerProfile:
    miner_id: str
    compute_power: float
    balance: float
    consecutive_blocks: int
    bandwidth_usage: float
    storage_usage: float

    def __post_init__(self) -> None:
        if not self.miner_id:
            raise ValueError("miner_id must be non-empty")
        _require_finite("compute_power", self.compute_power)
        _require_finite("balance", self.balance)
        _require_finite("bandwidth_usage", self.bandwidth_usage)
        _require_finite("storage_usage", self.storage_usage)
        if self.consecutive_blocks < 0:
            raise ValueError("consecutive_blocks must be non-negative")


@dataclass(frozen=True)
class ConsensusParams:
    min_power: float = 1.0
    min_balance: float = 1.0
    max_consecutive: int = 3
    max_bandwidth: float = 1000.0
    max_storage: float = 1000.0

    def __post_init__(self) -> None:
        _require_finite("min_power", self.min_power)
        _require_finite("min_balance", self.min_balance)
        _require_finite("max_bandwidth", self.max_bandwidth)
        _require_finite("max_storage", self.max_storage)
        if self.max_consecutive < 0:
            raise ValueError("max_consecutive must be non-negative")


@dataclass
class RoundStats:
    rounds: int
    wins: dict[str, int]
    skipped_rounds: int
    winner_sequence: list[str | None] = field(default_factory=list)


def eligible(miner: MinerProfile, params: ConsensusParams) -> bool:
    """All five gates must hold; every bound is inclusive."""
    return (
        miner.compute_power >= params.min_power
        and miner.balance >= params.min_balance
        and miner.consecutive_blocks <= params.max_consecutive
        and miner.bandwidth_usage <= params.max_bandwidth
        and miner.storage_usage <= params.max_storage
    )


def select_miner(
    miners: list[MinerProfile],
    params: ConsensusParams,
    round_seed: bytes,
) -> MinerProfile:
    """Uniform draw over the eligible subset, keyed by digest(round_seed).

    The digest is reduced modulo the subset size; with a 256-bit digest the
    bias is far below anything a fairness test could see.
    """
    if len(round_seed) != 32:
        raise ValueError("round_seed must be 32 bytes")
    pool = [m for m in miners if eligible(m, params)]
    if not pool:
        raise NoEligibleMiner("no miner passes the eligibility gates")
    digest = hashlib.sha256(round_seed).digest()
    index = int.from_bytes(digest, "big") % len(pool)
    return pool[index]


def round_seed_for(seed: int, round_index: int) -> bytes:
    """Per-round 32-byte seed: digest of the master seed and the round index."""
    return hashlib.sha256(
        struct.pack(">q", seed) + struct.pack(">Q", round_index)
    ).digest()


def apply_win(miners: list[MinerProfile], winner_id: str) -> None:
    """The winner's consecutive count increments; every other miner's resets."""
    for miner in miners:
        if miner.miner_id == winner_id:
            miner.consecutive_blocks += 1
        else:
            miner.consecutive_blocks = 0


def run_rounds(
    miners: list[MinerProfile],
    params: ConsensusParams,
    n_rounds: int,
    seed: int,
) -> RoundStats:
    """Simulate n_rounds of selection. The caller's profiles are not mutated."""
    if n_rounds < 0:
        raise ValueError("n_rounds must be non-negative")
    pool = [replace(m) for m in miners]
    wins = {m.miner_id: 0 for m in pool}
    sequence: list[str | None] = []
    skipped = 0
    for k in range(n_rounds):
        try:
            winner = select_miner(pool, params, round_seed_for(seed, k))
        except NoEligibleMiner:
            skipped += 1
            sequence.append(None)
            continue
        wins[winner.miner_id] += 1
        sequence.append(winner.miner_id)
        apply_win(pool, winner.miner_id)
    return RoundStats(rounds=n_rounds, wins=wins, skipped_rounds=skipped, winner_sequence=sequence)


# -- scenario file and stats CSV ----------------------------------------------
#
# Scenario JSON:
#   {"miners": [{"miner_id": "...", "compute_power": 0, "balance": 0,
#                "consecutive_blocks": 0, "bandwidth_usage": 0, "storage_usage": 0}],
#    "params": {"min_power": 0, "min_balance": 0, "max_consecutive": 0,
#               "max_bandwidth": 0, "max_storage": 0},
#    "rounds": 1000, "seed": 7}

def load_scenario(path: str | Path) -> tuple[list[MinerProfile], ConsensusParams, int, int]:
    doc = json.loads(Path(path).read_text())
    miners = [MinerProfile(**m) for m in doc["miners"]]
    params = ConsensusParams(**doc.get("params", {}))
    return miners, params, int(doc["rounds"]), int(doc.get("seed", 0))


def write_stats_csv(stats: RoundStats, path: str | Path) -> None:
    decided = stats.rounds - stats.skipped_rounds
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["miner_id", "wins", "win_fraction"])
        for miner_id in sorted(stats.wins):
            wins = stats.wins[miner_id]
            fraction = wins / decided if decided else 0.0
            writer.writerow([miner_id, wins, f"{fraction:.6f}"])


def stats_rows(stats: RoundStats) -> list[tuple[str, int, float]]:
    decided = stats.rounds - stats.skipped_rounds
    return [
        (miner_id, stats.wins[miner_id], stats.wins[miner_id] / decided if decided else 0.0)
        for miner_id in sorted(stats.wins)
    ]


def miners_to_json(miners: Iterable[MinerProfile]) -> str:
    return json.dumps(
        [
            {
                "miner_id": m.miner_id,
                "compute_power": m.compute_power,
                "balance": m.balance,
                "consecutive_blocks": m.consecutive_blocks,
                "bandwidth_usage": m.bandwidth_usage,
                "storage_usage": m.storage_usage,
            }
            for m in miners
        ],
        indent=2,
    )


def miners_from_json(text: str) -> list[MinerProfile]:
    return [MinerProfile(**m) for m in json.loads(text)]
