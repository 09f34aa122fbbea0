"""Audio signals and WAV io.

Only mono 16-bit signed little-endian PCM WAV is accepted; everything else
raises UnsupportedFormat. Samples are scaled by 1/32768 into [-1, 1).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import UnsupportedFormat

_PCM_SCALE = 32768.0


@dataclass
class AudioSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioSignal expects a 1-D sample array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        peak = float(np.abs(self.samples).max()) if self.samples.size else 0.0
        if peak > 1.0 + 1e-9:
            raise ValueError(f"samples must lie in [-1, 1], peak magnitude {peak}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_wav(path: str | Path) -> AudioSignal:
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getcomptype() != "NONE":
                raise UnsupportedFormat(f"{path}: compressed WAV is not supported")
            if fh.getnchannels() != 1:
                raise UnsupportedFormat(f"{path}: only mono WAV is supported")
            if fh.getsampwidth() != 2:
                raise UnsupportedFormat(f"{path}: only 16-bit PCM is supported")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise UnsupportedFormat(f"{path}: not a readable WAV file ({exc})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / _PCM_SCALE
    return AudioSignal(samples, rate)


def save_wav(signal: AudioSignal, path: str | Path) -> None:
    clipped = np.clip(signal.samples, -1.0, 1.0 - 1.0 / _PCM_SCALE)
    pcm = np.rint(clipped * _PCM_SCALE).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(signal.sample_rate)
        fh.writeframes(pcm.tobytes())
