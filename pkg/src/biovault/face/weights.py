"""Stage weights: the fixed topology table, seeded random initialization, and
a versioned binary file format.

Topology (single-channel input, valid 3x3 convs, 2x2 stride-2 pooling):

    proposal net  (12x12): conv 8 -> pool -> conv 16            -> score, 4 deltas
    refine net    (24x24): conv 8 -> pool -> conv 16 -> pool -> fc 64
                                                               -> score, 4 deltas
    output net    (48x48): conv 8 -> pool -> conv 16 -> pool -> conv 32 -> pool
                                                  -> fc 128 -> score, 4 deltas,
                                                               10 landmark coords
    embedding net (160x160): conv 4 -> pool -> conv 8 -> pool -> conv 16 -> pool
                                        -> conv 16 -> pool -> fc 512

File format, byte-exact:

    magic            4 bytes, ASCII "FBW1"
    version length   2 bytes, unsigned little-endian
    version          UTF-8 bytes
    array count      4 bytes, unsigned little-endian
    per array:
        name length  2 bytes, unsigned little-endian
        name         UTF-8 bytes
        ndim         1 byte
        dims         ndim x 4 bytes, unsigned little-endian
        values       prod(dims) x 8 bytes, IEEE-754 float64 little-endian,
                     C (row-major) order

Arrays are written in sorted name order so equal weights serialize to equal
bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, UnsupportedFormat

WEIGHTS_MAGIC = b"FBW1"

# name -> expected shape; the single source of truth for the topology.
TOPOLOGY: dict[str, tuple[int, ...]] = {
    "pnet.conv1": (8, 1, 3, 3),
    "pnet.conv2": (16, 8, 3, 3),
    "pnet.score.w": (1, 144),
    "pnet.score.b": (1,),
    "pnet.deltas.w": (4, 144),
    "pnet.deltas.b": (4,),
    "rnet.conv1": (8, 1, 3, 3),
    "rnet.conv2": (16, 8, 3, 3),
    "rnet.fc.w": (64, 256),
    "rnet.fc.b": (64,),
    "rnet.score.w": (1, 64),
    "rnet.score.b": (1,),
    "rnet.deltas.w": (4, 64),
    "rnet.deltas.b": (4,),
    "onet.conv1": (8, 1, 3, 3),
    "onet.conv2": (16, 8, 3, 3),
    "onet.conv3": (32, 16, 3, 3),
    "onet.fc.w": (128, 512),
    "onet.fc.b": (128,),
    "onet.score.w": (1, 128),
    "onet.score.b": (1,),
    "onet.deltas.w": (4, 128),
    "onet.deltas.b": (4,),
    "onet.landmarks.w": (10, 128),
    "onet.landmarks.b": (10,),
    "embed.conv1": (4, 1, 3, 3),
    "embed.conv2": (8, 4, 3, 3),
    "embed.conv3": (16, 8, 3, 3),
    "embed.conv4": (16, 16, 3, 3),
    "embed.fc.w": (512, 1024),
    "embed.fc.b": (512,),
}

EMBEDDING_DIM = 512
EMBED_INPUT_SIZE = 160
PNET_WINDOW = 12
RNET_INPUT = 24
ONET_INPUT = 48


@dataclass
class StageWeights:
    """All stage parameters as named float64 arrays plus a version tag."""

    version: str
    arrays: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        validate_topology(self.arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def dense_pair(self, prefix: str) -> tuple[np.ndarray, np.ndarray]:
        return self.arrays[f"{prefix}.w"], self.arrays[f"{prefix}.b"]


def validate_topology(arrays: dict[str, np.ndarray]) -> None:
    missing = sorted(set(TOPOLOGY) - set(arrays))
    extra = sorted(set(arrays) - set(TOPOLOGY))
    if missing or extra:
        raise DimensionMismatch(f"weight arrays mismatch: missing {missing}, extra {extra}")
    for name, expected in TOPOLOGY.items():
        got = arrays[name].shape
        if got != expected:
            raise DimensionMismatch(f"{name}: expected shape {expected}, got {got}")


def random_weights(seed: int) -> StageWeights:
    """Deterministic He-style initialization from a seed.

    Conv kernels carry no bias (the conv primitive has none); dense biases are
    drawn small so an all-zero input still produces a nonzero activation.
    """
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in TOPOLOGY.items():
        if name.endswith(".b"):
            arrays[name] = 0.01 * rng.standard_normal(shape)
        elif name.endswith(".w"):
            fan_in = shape[1]
            arrays[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        else:  # conv kernel (c_out, c_in, kh, kw)
            fan_in = shape[1] * shape[2] * shape[3]
            arrays[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
    return StageWeights(version=f"random-{seed}", arrays=arrays)


def save_weights(weights: StageWeights, path: str | Path) -> None:
    version = weights.version.encode()
    parts = [WEIGHTS_MAGIC, struct.pack("<H", len(version)), version,
             struct.pack("<I", len(weights.arrays))]
    for name in sorted(weights.arrays):
        arr = np.ascontiguousarray(weights.arrays[name], dtype=np.float64)
        encoded = name.encode()
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_weights(path: str | Path) -> StageWeights:
    data = Path(path).read_bytes()
    if data[:4] != WEIGHTS_MAGIC:
        raise UnsupportedFormat(f"{path}: not a weights file (bad magic)")
    pos = 4

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise UnsupportedFormat(f"{path}: truncated weights file")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (vlen,) = struct.unpack("<H", take(2))
    version = take(vlen).decode()
    (count,) = struct.unpack("<I", take(4))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode()
        (ndim,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim))
        n_values = int(np.prod(dims)) if ndim else 1
        raw = take(8 * n_values)
        arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)
    if pos != len(data):
        raise UnsupportedFormat(f"{path}: trailing bytes after the last array")
    return StageWeights(version=version, arrays=arrays)
