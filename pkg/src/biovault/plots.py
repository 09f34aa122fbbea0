"""SVG figures rendered from the delimited benchmark and consensus outputs."""

from __future__ import annotations

import csv
import statistics
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import MODES, BenchRow, read_csv


def _medians(rows: list[BenchRow], metric: str) -> dict[str, dict[int, float]]:
    grouped: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r.metric == metric and r.dimension == "payload_bytes":
            grouped[r.mode][int(r.value)].append(r.measure)
    return {
        mode: {size: statistics.median(vals) for size, vals in sorted(sizes.items())}
        for mode, sizes in grouped.items()
    }


def render_bench_plots(csv_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Growth, latency, and throughput figures for one benchmark CSV."""
    rows = read_csv(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    encodings = _medians(rows, "encoding_bytes")
    fig, ax = plt.subplots(figsize=(6, 4))
    for mode in MODES:
        points = encodings.get(mode, {})
        ax.plot(list(points), list(points.values()), marker="o", label=mode)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("payload bytes")
    ax.set_ylabel("record encoding bytes")
    ax.set_title("Record growth by storage mode")
    ax.legend()
    path = out_dir / "growth.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    offsets = {-0.35: ("store_seconds", "store"), 0.05: ("retrieve_seconds", "retrieve")}
    sizes = sorted({int(r.value) for r in rows if r.dimension == "payload_bytes"})
    positions = range(len(sizes))
    width = 0.2
    for base, (metric, label) in offsets.items():
        medians = _medians(rows, metric)
        for j, mode in enumerate(MODES):
            values = [medians.get(mode, {}).get(size, 0.0) for size in sizes]
            ax.bar(
                [p + base + j * width for p in positions],
                values,
                width=width,
                label=f"{label} ({mode})",
            )
    ax.set_xticks(list(positions))
    ax.set_xticklabels([str(s) for s in sizes])
    ax.set_xlabel("payload bytes")
    ax.set_ylabel("median seconds")
    ax.set_title("Median store and retrieve latency")
    ax.legend(fontsize=8)
    path = out_dir / "latency.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    tps = _medians(rows, "tps")
    if tps:
        fig, ax = plt.subplots(figsize=(6, 4))
        tps_sizes = sorted({size for points in tps.values() for size in points})
        for j, mode in enumerate(MODES):
            values = [tps.get(mode, {}).get(size, 0.0) for size in tps_sizes]
            ax.bar(
                [p + (j - 0.5) * 0.35 for p in range(len(tps_sizes))],
                values,
                width=0.35,
                label=mode,
            )
        ax.set_xticks(list(range(len(tps_sizes))))
        ax.set_xticklabels([str(s) for s in tps_sizes])
        ax.set_xlabel("payload bytes")
        ax.set_ylabel("median transactions per second")
        ax.set_title("Append throughput")
        ax.legend()
        path = out_dir / "tps.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def render_consensus_plot(csv_path: str | Path, out_path: str | Path) -> Path:
    """Bar chart of per-miner wins from a consensus stats CSV."""
    miners: list[str] = []
    wins: list[int] = []
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            miners.append(row["miner_id"])
            wins.append(int(row["wins"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(miners)), wins)
    ax.set_xticks(range(len(miners)))
    ax.set_xticklabels(miners, rotation=30, ha="right")
    ax.set_ylabel("rounds won")
    ax.set_title("Consensus wins by miner")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
