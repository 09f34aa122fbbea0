"""Deterministic synthetic corpus: per-user face frames and voice recordings.

Faces are procedural textures (smooth blobs plus oriented gratings) whose
parameters are drawn per user, so two users never share a texture while the
frames of one user differ only by low-amplitude pixel noise. Voices are
harmonic series with a user-specific fundamental and roll-off, mixed with
band-shaped noise around a user-specific resonance. Everything derives from
numpy's seeded generators, so a (seed, user, index) triple always reproduces
the same bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .face.image import GrayImage, bilinear_resize, save_pgm
from .voice.audio import AudioSignal, save_wav


@dataclass(frozen=True)
class CorpusSpec:
    n_users: int = 8
    frames_per_user: int = 4
    recordings_per_user: int = 2
    frame_size: int = 64
    noise_scale: float = 0.004
    sample_rate: int = 16000
    recording_seconds: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_users < 2:
            raise ValueError("a corpus needs at least two users")
        if self.frames_per_user < 1 or self.recordings_per_user < 1:
            raise ValueError("each user needs at least one frame and one recording")
        if self.frame_size < 16:
            raise ValueError("frame_size must be at least 16")
        if self.recording_seconds <= 0:
            raise ValueError("recording_seconds must be positive")


@dataclass(frozen=True)
class CorpusUser:
    index: int
    name: str
    dob: str
    email: str
    phone: str
    video_dir: str
    recordings: tuple[str, ...]


@dataclass(frozen=True)
class CorpusManifest:
    spec: CorpusSpec
    users: tuple[CorpusUser, ...]


def synth_face_frame(spec: CorpusSpec, user_index: int, frame_index: int) -> GrayImage:
    """One frame of one user's video: shared base texture plus frame noise."""
    size = spec.frame_size
    base_rng = np.random.default_rng([spec.seed, 11, user_index])
    blob = bilinear_resize(
        GrayImage(base_rng.random((6, 6))), size, size
    ).pixels
    ys, xs = np.mgrid[0:size, 0:size] / float(size)
    texture = 0.5 + 0.2 * (blob - 0.5) * 2.0
    for _ in range(2):
        fx = base_rng.uniform(2.0, 6.0)
        fy = base_rng.uniform(2.0, 6.0)
        phase = base_rng.uniform(0.0, 2.0 * np.pi)
        texture = texture + 0.12 * np.sin(2.0 * np.pi * (fx * xs + fy * ys) + phase)
    texture = np.clip(texture, 0.02, 0.98)
    frame_rng = np.random.default_rng([spec.seed, 12, user_index, frame_index])
    noisy = texture + spec.noise_scale * frame_rng.standard_normal((size, size))
    return GrayImage(np.clip(noisy, 0.0, 1.0))


def synth_voice_recording(
    spec: CorpusSpec, user_index: int, recording_index: int
) -> AudioSignal:
    """One recording of one user's voice: harmonics plus shaped noise."""
    sr = spec.sample_rate
    n = int(round(spec.recording_seconds * sr))
    rng = np.random.default_rng([spec.seed, 21, user_index, recording_index])
    f0 = (105.0 + 16.0 * user_index) * (1.0 + 0.004 * (recording_index - 0.5))
    rolloff = 0.6 + 0.1 * (user_index % 8)
    t = np.arange(n) / sr
    voiced = np.zeros(n)
    for h in range(1, 11):
        voiced += h ** (-rolloff) * np.sin(2.0 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi))
    white = rng.standard_normal(n)
    freqs = np.fft.rfftfreq(n, d=1.0 / sr)
    resonance = 600.0 + 250.0 * user_index
    bump = np.exp(-(((freqs - resonance) / 120.0) ** 2))
    shaped = np.fft.irfft(np.fft.rfft(white) * bump, n)
    voiced /= np.max(np.abs(voiced))
    shaped /= np.max(np.abs(shaped))
    mix = 0.75 * voiced + 0.15 * shaped
    mix *= 0.9 / np.max(np.abs(mix))
    fade = min(100, n // 10)
    ramp = np.linspace(0.0, 1.0, fade)
    mix[:fade] *= ramp
    mix[-fade:] *= ramp[::-1]
    return AudioSignal(samples=mix, sample_rate=sr)


def _user_identity(index: int) -> tuple[str, str, str, str]:
    name = f"User {index:02d}"
    dob = f"19{70 + index:02d}-03-{index + 1:02d}"
    email = f"user{index:02d}@example.com"
    phone = f"+1-555-01{index:02d}"
    return name, dob, email, phone


def generate_corpus(root: str | Path, spec: CorpusSpec) -> CorpusManifest:
    """Write the corpus under root and return its manifest (also saved as JSON)."""
    root = Path(root)
    users = []
    for u in range(spec.n_users):
        user_dir = root / f"user{u:02d}"
        video_dir = user_dir / "video"
        audio_dir = user_dir / "audio"
        video_dir.mkdir(parents=True, exist_ok=True)
        audio_dir.mkdir(parents=True, exist_ok=True)
        for i in range(spec.frames_per_user):
            save_pgm(synth_face_frame(spec, u, i), video_dir / f"frame_{i:03d}.pgm")
        recordings = []
        for j in range(spec.recordings_per_user):
            path = audio_dir / f"rec_{j:02d}.wav"
            save_wav(synth_voice_recording(spec, u, j), path)
            recordings.append(str(path))
        name, dob, email, phone = _user_identity(u)
        users.append(
            CorpusUser(
                index=u,
                name=name,
                dob=dob,
                email=email,
                phone=phone,
                video_dir=str(video_dir),
                recordings=tuple(recordings),
            )
        )
    manifest = CorpusManifest(spec=spec, users=tuple(users))
    (root / "manifest.json").write_text(manifest_to_json(manifest, root))
    return manifest


def manifest_to_json(manifest: CorpusManifest, root: str | Path) -> str:
    """Serialize with paths stored relative to the corpus root."""
    root = Path(root)
    doc = {
        "spec": asdict(manifest.spec),
        "users": [
            {
                **asdict(user),
                "video_dir": str(Path(user.video_dir).relative_to(root)),
                "recordings": [
                    str(Path(r).relative_to(root)) for r in user.recordings
                ],
            }
            for user in manifest.users
        ],
    }
    return json.dumps(doc, indent=2)


def load_manifest(root: str | Path) -> CorpusManifest:
    root = Path(root)
    doc = json.loads((root / "manifest.json").read_text())
    spec = CorpusSpec(**doc["spec"])
    users = tuple(
        CorpusUser(
            index=u["index"],
            name=u["name"],
            dob=u["dob"],
            email=u["email"],
            phone=u["phone"],
            video_dir=str(root / u["video_dir"]),
            recordings=tuple(str(root / r) for r in u["recordings"]),
        )
        for u in doc["users"]
    )
    return CorpusManifest(spec=spec, users=users)
