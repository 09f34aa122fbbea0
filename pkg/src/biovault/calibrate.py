"""Threshold calibration from genuine and imposter score samples.

The operating rule everywhere in the system is strict acceptance: a trial
passes when its score is strictly greater than the threshold. Calibration
sweeps candidate thresholds, reports the false-accept and false-reject rates,
and picks the equal-error operating point. When the two score populations do
not overlap at all, the midpoint of the separating gap is returned and both
error rates are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    far: float    # imposter trials accepted at the threshold
    frr: float    # genuine trials rejected at the threshold
    eer: float    # (far + frr) / 2 at the operating point
    separable: bool


def far_frr(
    genuine: Sequence[float], imposter: Sequence[float], threshold: float
) -> tuple[float, float]:
    """Error rates under the strict score > threshold acceptance rule."""
    g = np.asarray(genuine, dtype=np.float64)
    i = np.asarray(imposter, dtype=np.float64)
    return float(np.mean(i > threshold)), float(np.mean(g <= threshold))


def sweep(
    genuine: Sequence[float], imposter: Sequence[float]
) -> list[tuple[float, float, float]]:
    """(threshold, far, frr) at every distinct observed score."""
    g = np.asarray(genuine, dtype=np.float64)
    i = np.asarray(imposter, dtype=np.float64)
    points = []
    for t in np.unique(np.concatenate([g, i])):
        far, frr = far_frr(g, i, float(t))
        points.append((float(t), far, frr))
    return points


def calibrate_threshold(
    genuine: Sequence[float], imposter: Sequence[float]
) -> CalibrationResult:
    g = np.asarray(genuine, dtype=np.float64)
    i = np.asarray(imposter, dtype=np.float64)
    if g.size == 0 or i.size == 0:
        raise ValueError("calibration needs both genuine and imposter scores")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(i))):
        raise ValueError("calibration scores must be finite")
    gap_low = float(i.max())
    gap_high = float(g.min())
    if gap_low < gap_high:
        t = (gap_low + gap_high) / 2.0
        return CalibrationResult(t, 0.0, 0.0, 0.0, True)
    best: tuple[tuple[float, float, float], CalibrationResult] | None = None
    for t, far, frr in sweep(g, i):
        # closest to equal error, then lowest worst-case rate, then lower t
        key = (abs(far - frr), max(far, frr), t)
        if best is None or key < best[0]:
            best = (key, CalibrationResult(t, far, frr, (far + frr) / 2.0, False))
    assert best is not None
    return best[1]


# -- corpus-level calibration ---------------------------------------------------

@dataclass(frozen=True)
class CorpusCalibration:
    face: CalibrationResult
    voice: CalibrationResult
    face_genuine: tuple[float, ...]
    face_imposter: tuple[float, ...]
    voice_genuine: tuple[float, ...]
    voice_imposter: tuple[float, ...]


def calibrate_app(app, manifest) -> CorpusCalibration:
    """Calibrate both gates against a corpus already registered into the app.

    Face trials compare every frame of every user against every stored
    embedding; voice trials score every recording under every enrolled model.
    A trial is genuine when the claimed user produced the sample. The face
    gate accepts at similarity >= theta while calibration assumes a strict
    rule; on a separable corpus the returned gap midpoint never coincides
    with an observed score, so the distinction cannot bite.
    """
    from .face.image import load_pgm
    from .face.pipeline import cosine_similarity
    from .voice.audio import load_wav
    from .voice.features import feature_matrix
    from .voice.gmm import gmm_log_likelihood
    from .workflows import derive_user_id, load_video_frames

    user_ids = [
        derive_user_id(u.name, u.dob, u.email, u.phone) for u in manifest.users
    ]
    stored = {
        uid: np.asarray(app.db.get(uid).extras["face_embedding"], dtype=np.float64)
        for uid in user_ids
    }
    face_genuine: list[float] = []
    face_imposter: list[float] = []
    for source, user in zip(user_ids, manifest.users):
        for frame in load_video_frames(user.video_dir):
            embedding = app.frame_embedding(frame)
            for claimed in user_ids:
                sim = cosine_similarity(embedding, stored[claimed])
                (face_genuine if claimed == source else face_imposter).append(sim)
    voice_genuine: list[float] = []
    voice_imposter: list[float] = []
    for source, user in zip(user_ids, manifest.users):
        for path in user.recordings:
            feats = feature_matrix(load_wav(path), app.config.features)
            for claimed in user_ids:
                model = app.db.get(claimed).model
                value = gmm_log_likelihood(model, feats) / feats.shape[0]
                (voice_genuine if claimed == source else voice_imposter).append(value)
    return CorpusCalibration(
        face=calibrate_threshold(face_genuine, face_imposter),
        voice=calibrate_threshold(voice_genuine, voice_imposter),
        face_genuine=tuple(face_genuine),
        face_imposter=tuple(face_imposter),
        voice_genuine=tuple(voice_genuine),
        voice_imposter=tuple(voice_imposter),
    )
