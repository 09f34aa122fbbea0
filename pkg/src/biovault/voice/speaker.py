"""Speaker enrollment, scoring, authentication, and mean-only adaptation.

A speaker model is a diagonal GMM over the per-frame feature vectors. Scores
are per-frame averages of the log mixture density, so recordings of different
lengths compare on the same scale. Authentication picks the best-scoring
enrolled user and accepts only when that user's score strictly exceeds the
threshold (lexicographic user id breaks exact ties).

Adaptation estimates one linear map W from the adaptation sample's second
moment S = (1/N) sum x x^T and the model's moment C = sum_k pi_k mu_k mu_k^T
+ sigma_bar^2 I (sigma_bar^2 is the weight-averaged variance), reading the
source's C/S as the right division W = C S^-1; only the means move.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import (
    DuplicateUser,
    EmptyDatabase,
    FeatureConfigMismatch,
    InsufficientAudio,
    SingularStatistics,
    UnknownUser,
)
from .audio import AudioSignal
from .features import FeatureConfig, feature_matrix
from .gmm import GmmModel, em_fit_detailed, gmm_log_likelihood, select_k


@dataclass(frozen=True)
class AuthConfig:
    tau: float = -100.0   # uncalibrated default; the calibrate flow replaces it
    min_frames: int = 10

    def __post_init__(self) -> None:
        if self.min_frames < 3:
            raise ValueError("min_frames must be at least 3 (delta features)")


@dataclass(frozen=True)
class KPolicy:
    """Model-order policy: a fixed K, or criterion selection over candidates."""

    fixed_k: int | None = 4
    candidates: tuple[int, ...] = (1, 2, 4, 8)
    criterion: str = "bic"

    def __post_init__(self) -> None:
        if self.fixed_k is not None and self.fixed_k < 1:
            raise ValueError("fixed_k must be positive")
        if self.criterion not in ("aic", "bic"):
            raise ValueError("criterion must be 'aic' or 'bic'")


@dataclass
class UserEntry:
    user_id: str
    model: GmmModel
    feature_config: FeatureConfig
    metadata: dict[str, Any] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AuthDecision:
    accepted_user: str | None
    scores: dict[str, float]
    best_user: str
    best_score: float
    tau: float


def _features(sample: AudioSignal, cfg: FeatureConfig, min_frames: int) -> np.ndarray:
    feats = feature_matrix(sample, cfg)
    if feats.shape[0] < min_frames:
        raise InsufficientAudio(
            f"sample yields {feats.shape[0]} frames, need at least {min_frames}"
        )
    return feats


def enroll(
    user_id: str,
    recordings: list[AudioSignal],
    cfg: FeatureConfig,
    policy: KPolicy | None = None,
    min_frames: int = 50,
    init_seed: int = 0,
) -> UserEntry:
    """Train a speaker model from one or more recordings."""
    if not recordings:
        raise InsufficientAudio("enrollment needs at least one recording")
    policy = policy or KPolicy()
    feats = np.vstack([feature_matrix(rec, cfg) for rec in recordings])
    if feats.shape[0] < min_frames:
        raise InsufficientAudio(
            f"enrollment yields {feats.shape[0]} frames, need at least {min_frames}"
        )
    if policy.fixed_k is not None:
        model, info = em_fit_detailed(feats, policy.fixed_k, init_seed=init_seed)
        chosen_k = policy.fixed_k
        final_ll = info.final_log_likelihood
        iterations = info.iterations
    else:
        chosen_k, model = select_k(
            feats, list(policy.candidates), policy.criterion, init_seed=init_seed
        )
        final_ll = gmm_log_likelihood(model, feats)
        iterations = -1  # not tracked across the candidate sweep
    metadata = {
        "k": chosen_k,
        "final_log_likelihood": final_ll,
        "iterations": iterations,
        "frames": int(feats.shape[0]),
    }
    return UserEntry(user_id=user_id, model=model, feature_config=cfg, metadata=metadata)


def score(model: GmmModel, sample: AudioSignal, cfg: FeatureConfig) -> float:
    """Average per-frame log-likelihood of the sample under the model."""
    feats = _features(sample, cfg, min_frames=3)
    return gmm_log_likelihood(model, feats) / feats.shape[0]


class EnrollmentDb:
    """user_id -> UserEntry, with one JSON document per user on disk."""

    def __init__(self, directory: str | Path | None = None) -> None:
        self.directory = Path(directory) if directory is not None else None
        self._entries: dict[str, UserEntry] = {}
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            for path in sorted(self.directory.glob("*.json")):
                entry = entry_from_json(path.read_text())
                self._entries[entry.user_id] = entry

    def add(self, entry: UserEntry, replace: bool = False) -> None:
        if not replace and entry.user_id in self._entries:
            raise DuplicateUser(entry.user_id)
        self._entries[entry.user_id] = entry
        self._persist(entry)

    def get(self, user_id: str) -> UserEntry:
        try:
            return self._entries[user_id]
        except KeyError:
            raise UnknownUser(user_id) from None

    def remove(self, user_id: str) -> None:
        self._entries.pop(user_id, None)
        if self.directory is not None:
            path = self.directory / f"{user_id}.json"
            if path.exists():
                path.unlink()

    def __contains__(self, user_id: str) -> bool:
        return user_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def user_ids(self) -> list[str]:
        return sorted(self._entries)

    def entries(self) -> list[UserEntry]:
        return [self._entries[u] for u in self.user_ids()]

    def _persist(self, entry: UserEntry) -> None:
        if self.directory is not None:
            path = self.directory / f"{entry.user_id}.json"
            path.write_text(entry_to_json(entry))


def entry_to_json(entry: UserEntry) -> str:
    doc = {
        "user_id": entry.user_id,
        "model": {
            "weights": entry.model.weights.tolist(),
            "means": entry.model.means.tolist(),
            "variances": entry.model.variances.tolist(),
            "k": entry.model.n_components,
            "d": entry.model.dim,
        },
        "feature_config": asdict(entry.feature_config),
        "metadata": entry.metadata,
        "extras": entry.extras,
    }
    return json.dumps(doc, indent=2)


def entry_from_json(text: str) -> UserEntry:
    doc = json.loads(text)
    model_doc = doc["model"]
    model = GmmModel(
        weights=np.array(model_doc["weights"]),
        means=np.array(model_doc["means"]),
        variances=np.array(model_doc["variances"]),
    )
    if model.n_components != model_doc["k"] or model.dim != model_doc["d"]:
        raise ValueError("stored model dimensions disagree with its arrays")
    return UserEntry(
        user_id=doc["user_id"],
        model=model,
        feature_config=FeatureConfig(**doc["feature_config"]),
        metadata=doc.get("metadata", {}),
        extras=doc.get("extras", {}),
    )


def authenticate(
    sample: AudioSignal,
    db: EnrollmentDb,
    auth_cfg: AuthConfig,
    feature_cfg: FeatureConfig,
) -> AuthDecision:
    """Score the sample under every enrolled model and apply the threshold.

    The sample is featurized once under feature_cfg; an entry enrolled under a
    different config is refused rather than silently rescored.
    """
    if len(db) == 0:
        raise EmptyDatabase("no enrolled users")
    feats = _features(sample, feature_cfg, auth_cfg.min_frames)
    scores: dict[str, float] = {}
    for entry in db.entries():
        if entry.feature_config != feature_cfg:
            raise FeatureConfigMismatch(
                f"user {entry.user_id} was enrolled under a different feature config"
            )
        scores[entry.user_id] = gmm_log_likelihood(entry.model, feats) / feats.shape[0]
    # max score, exact ties broken by lexicographically smallest user id
    best_score = max(scores.values())
    best_user = min(u for u, v in scores.items() if v == best_score)
    accepted = best_user if best_score > auth_cfg.tau else None
    return AuthDecision(
        accepted_user=accepted,
        scores=scores,
        best_user=best_user,
        best_score=best_score,
        tau=auth_cfg.tau,
    )


# -- adaptation -------------------------------------------------------------------

def adapt_mllr_features(model: GmmModel, feats: np.ndarray) -> GmmModel:
    """Mean-only linear adaptation from a feature matrix (n, d)."""
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != model.dim:
        raise InsufficientAudio(
            f"adaptation features must be (n, {model.dim}), got {feats.shape}"
        )
    n, d = feats.shape
    if n < d:
        raise InsufficientAudio(f"adaptation needs at least {d} frames, got {n}")
    s = feats.T @ feats / n
    sigma_bar = float(np.sum(model.weights * model.variances.mean(axis=1)))
    c = (model.weights[:, None, None]
         * (model.means[:, :, None] * model.means[:, None, :])).sum(axis=0)
    c = c + sigma_bar * np.eye(d)
    w = _solve_right_division(c, s, d)
    return GmmModel(
        weights=model.weights.copy(),
        means=model.means @ w.T,
        variances=model.variances.copy(),
    )


def _solve_right_division(c: np.ndarray, s: np.ndarray, d: int) -> np.ndarray:
    """W = C S^-1, adding the ridge (1e-6 tr(S)/d) I when S is ill-conditioned."""
    def attempt(mat: np.ndarray) -> np.ndarray | None:
        if np.linalg.cond(mat) > 1e12:
            return None
        # W S = C  <=>  S^T W^T = C^T
        return np.linalg.solve(mat.T, c.T).T

    w = attempt(s)
    if w is None:
        ridge = 1e-6 * float(np.trace(s)) / d
        if ridge <= 0.0:
            raise SingularStatistics("adaptation second moment is zero")
        w = attempt(s + ridge * np.eye(d))
        if w is None:
            raise SingularStatistics("adaptation statistics remain singular after ridge")
    return w


def adapt_mllr(
    model: GmmModel, adaptation: list[AudioSignal], cfg: FeatureConfig
) -> GmmModel:
    """Mean-only linear adaptation from adaptation recordings."""
    if not adaptation:
        raise InsufficientAudio("adaptation needs at least one recording")
    feats = np.vstack([feature_matrix(rec, cfg) for rec in adaptation])
    return adapt_mllr_features(model, feats)
