"""System-wide configuration: one document covering every subsystem.

The JSON layout mirrors the dataclass nesting so a config file reads the same
way the code does. Seeds resolve through the FBT_SEED environment variable so
a whole run can be re-randomized without touching config files.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .consensus import ConsensusParams
from .face.pipeline import VerifyConfig
from .voice.features import FeatureConfig
from .voice.speaker import AuthConfig, KPolicy

SEED_ENV_VAR = "FBT_SEED"


def resolve_seed(default: int = 0) -> int:
    """The run seed: FBT_SEED from the environment, else the given default."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return default
    try:
        return int(raw, 0)
    except ValueError:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class SystemConfig:
    face: VerifyConfig = field(default_factory=VerifyConfig)
    voice: AuthConfig = field(default_factory=AuthConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    consensus: ConsensusParams = field(default_factory=ConsensusParams)
    k_policy: KPolicy = field(default_factory=KPolicy)
    encrypt_at_rest: bool = True
    storage_key_hex: str | None = None
    store_max_bytes: int | None = None
    login_frame_index: int = 0
    enroll_min_frames: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.storage_key_hex is not None:
            key = bytes.fromhex(self.storage_key_hex)
            if len(key) != 32:
                raise ValueError("storage_key_hex must encode exactly 32 bytes")
        if self.login_frame_index < 0:
            raise ValueError("login_frame_index must be non-negative")
        if self.enroll_min_frames < 3:
            raise ValueError("enroll_min_frames must be at least 3")

    def with_seed(self, seed: int) -> "SystemConfig":
        return replace(self, seed=seed)


def config_to_json(cfg: SystemConfig) -> str:
    doc = asdict(cfg)
    doc["k_policy"]["candidates"] = list(cfg.k_policy.candidates)
    return json.dumps(doc, indent=2)


def config_from_json(text: str) -> SystemConfig:
    doc = json.loads(text)
    kp = doc.get("k_policy", {})
    if "candidates" in kp:
        kp["candidates"] = tuple(kp["candidates"])
    return SystemConfig(
        face=VerifyConfig(**doc.get("face", {})),
        voice=AuthConfig(**doc.get("voice", {})),
        features=FeatureConfig(**doc.get("features", {})),
        consensus=ConsensusParams(**doc.get("consensus", {})),
        k_policy=KPolicy(**kp),
        encrypt_at_rest=doc.get("encrypt_at_rest", True),
        storage_key_hex=doc.get("storage_key_hex"),
        store_max_bytes=doc.get("store_max_bytes"),
        login_frame_index=doc.get("login_frame_index", 0),
        enroll_min_frames=doc.get("enroll_min_frames", 50),
        seed=doc.get("seed", 0),
    )


def load_config(path: str | Path) -> SystemConfig:
    return config_from_json(Path(path).read_text())


def save_config(cfg: SystemConfig, path: str | Path) -> None:
    Path(path).write_text(config_to_json(cfg) + "\n")
