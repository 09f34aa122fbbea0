"""End-to-end flows: registration, two-stage login, and record retrieval.

The App object wires every subsystem over one data directory:

    data_dir/
      store/objects/     content-addressed blobs (video tar, voice model, record)
      store.key          hex AES key, created on first use unless injected
      chain.jsonl        one line per appended transaction
      user_index.jsonl   append-only user_id -> tx_hash mapping (latest wins)
      miners.json        miner pool state
      users/             enrollment entries, one JSON per user
      weights.fbw        network weights (seeded random unless provided)
      sessions.jsonl     audit log, one JSON line per event

Registration prepares everything fallible first (video packing, embedding,
voice model training, blob writes, miner selection) and only then appends the
transaction; the append is the commit point. If anything before it fails, the
blobs written by this call are removed again, so a failed registration leaves
no trace. Login runs the video gate strictly before the voice gate and never
touches the voice models when the face is rejected.

Key handling is deliberately demo-grade: the key sits next to the data it
protects unless the config injects one. Real deployments must supply
storage_key_hex from a secret store.
"""

from __future__ import annotations

import enum
import hashlib
import io
import json
import secrets
import struct
import tarfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .config import SystemConfig
from .consensus import (
    MinerProfile,
    apply_win,
    miners_from_json,
    miners_to_json,
    round_seed_for,
    select_miner,
)
from .content_store import ContentId, ContentStore, EncryptionKey
from .errors import DuplicateUser, UnknownUser
from .face.image import GrayImage, load_pgm
from .face.pipeline import embedding_from_frame, verify
from .face.weights import StageWeights, load_weights, random_weights, save_weights
from .ledger import (
    Chain,
    TransactionRecord,
    ValidationReport,
    export_chain_file,
    import_chain_file,
    record_to_jsonl_line,
    validate_chain,
)
from .voice.audio import AudioSignal
from .voice.speaker import (
    EnrollmentDb,
    UserEntry,
    authenticate,
    enroll,
    entry_from_json,
    entry_to_json,
)

_U64_MASK = 2**64 - 1


class LoginStage(enum.Enum):
    VIDEO_PENDING = "video_pending"
    VOICE_PENDING = "voice_pending"
    GRANTED = "granted"
    DENIED = "denied"


@dataclass(frozen=True)
class RegistrationResult:
    user_id: str
    tx_hash: bytes
    record_cid: ContentId
    video_cid: ContentId
    voice_cid: ContentId
    miner_id: str


@dataclass
class LoginSession:
    user_id: str
    stage: LoginStage
    similarity: float | None = None
    voice_scores: dict[str, float] | None = None
    voice_best_user: str | None = None
    voice_best_score: float | None = None
    paraphrase: str | None = None
    reason: str | None = None


@dataclass(frozen=True)
class RetrievedRecord:
    user_id: str
    record: dict
    video: bytes
    voice: dict


def derive_user_id(name: str, dob: str, email: str, phone: str) -> str:
    """Stable id from the identity fields: 'u' plus 16 hex digits."""
    digest = hashlib.sha256(f"{name}|{dob}|{email}|{phone}".encode()).digest()
    return "u" + digest[:8].hex()


def sender_for(user_id: str) -> bytes:
    return hashlib.sha256(user_id.encode()).digest()[:20]


def load_video_frames(video_dir: str | Path) -> list[GrayImage]:
    paths = sorted(Path(video_dir).glob("*.pgm"))
    if not paths:
        raise ValueError(f"no .pgm frames in {video_dir}")
    return [load_pgm(p) for p in paths]


def pack_video_dir(video_dir: str | Path) -> bytes:
    """Deterministic tar of the directory's frames: same frames, same bytes.

    Frames are added in sorted name order with zeroed metadata, so the archive
    (and therefore its content id) depends only on the frame bytes.
    """
    paths = sorted(Path(video_dir).glob("*.pgm"))
    if not paths:
        raise ValueError(f"no .pgm frames in {video_dir}")
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.USTAR_FORMAT) as tar:
        for path in paths:
            data = path.read_bytes()
            info = tarfile.TarInfo(name=path.name)
            info.size = len(data)
            info.mtime = 0
            info.uid = 0
            info.gid = 0
            info.uname = ""
            info.gname = ""
            info.mode = 0o644
            tar.addfile(info, io.BytesIO(data))
    return buf.getvalue()


def unpack_video(blob: bytes) -> dict[str, bytes]:
    out: dict[str, bytes] = {}
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:") as tar:
        for member in tar.getmembers():
            if member.isfile():
                handle = tar.extractfile(member)
                assert handle is not None
                out[member.name] = handle.read()
    return out


# 32 rows of 8: exactly 256 words, one per byte value.
PARAPHRASE_WORDS = (
    "amber", "anchor", "apple", "arrow", "aspen", "atlas", "autumn", "badge",
    "bamboo", "basil", "beacon", "berry", "birch", "bishop", "blaze", "bloom",
    "bolt", "border", "box", "brass", "breeze", "bridge", "bronze", "brook",
    "bucket", "button", "cabin", "cactus", "camera", "candle", "canyon", "carbon",
    "castle", "cedar", "cellar", "chalk", "cherry", "chisel", "cinder", "citrus",
    "clay", "cliff", "clover", "cobalt", "comet", "copper", "coral", "cotton",
    "cradle", "crane", "crater", "cricket", "crystal", "curtain", "cypress", "dagger",
    "daisy", "dapple", "dawn", "delta", "denim", "desert", "dew", "diamond",
    "dome", "drift", "drum", "dusk", "eagle", "easel", "echo", "ember",
    "emerald", "engine", "fable", "falcon", "feather", "fern", "fiddle", "field",
    "fig", "finch", "fjord", "flame", "flint", "fog", "forest", "fossil",
    "fountain", "fox", "frost", "galaxy", "garnet", "gazebo", "geyser", "ginger",
    "glacier", "glade", "goblet", "granite", "grape", "gravel", "grove", "gull",
    "gust", "harbor", "hazel", "heather", "hedge", "heron", "hickory", "hill",
    "hollow", "honey", "horizon", "ibis", "icicle", "indigo", "ink", "iris",
    "iron", "island", "ivory", "ivy", "jade", "jasper", "jetty", "jungle",
    "juniper", "kelp", "kestrel", "kettle", "kiln", "kite", "lagoon", "lantern",
    "larch", "lark", "lava", "lemon", "lilac", "lily", "linen", "lotus",
    "lumen", "lynx", "magnet", "mango", "maple", "marble", "mast", "meadow",
    "mesa", "mint", "mirror", "mist", "molten", "moss", "moth", "mountain",
    "mulberry", "mural", "myrtle", "nectar", "nickel", "night", "nimbus", "north",
    "nutmeg", "oasis", "ocean", "olive", "onyx", "opal", "orchard", "orchid",
    "osprey", "otter", "owl", "oxbow", "palm", "paper", "pebble", "pepper",
    "petal", "pine", "plume", "pond", "poplar", "poppy", "prism", "pumpkin",
    "quarry", "quartz", "quill", "quince", "rain", "raven", "reef", "ridge",
    "river", "robin", "rocket", "rose", "rowan", "ruby", "rune", "saffron",
    "sage", "salmon", "sand", "sapphire", "satin", "scarlet", "shadow", "shell",
    "silver", "sketch", "slate", "smoke", "snow", "solar", "sparrow", "spice",
    "spruce", "star", "stone", "storm", "summit", "swan", "talon", "teal",
    "temple", "thistle", "thorn", "thunder", "tiger", "timber", "topaz", "torch",
    "trellis", "trout", "tulip", "tundra", "turnip", "umber", "valley", "vapor",
    "velvet", "vessel", "vine", "violet", "walnut", "willow", "winter", "zephyr",
)


def generate_paraphrase(seed: int) -> str:
    """Six words drawn from the fixed 256-word list; display-only, never stored."""
    digest = hashlib.sha256(
        b"paraphrase" + struct.pack(">Q", seed & _U64_MASK)
    ).digest()
    return " ".join(PARAPHRASE_WORDS[b] for b in digest[:6])


class App:
    """All subsystems over one data directory; restartable from disk state."""

    def __init__(
        self,
        data_dir: str | Path,
        config: SystemConfig | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.config = config or SystemConfig()
        self.clock = clock
        self.store = ContentStore(
            self.data_dir / "store", max_bytes=self.config.store_max_bytes
        )
        self.key = self._load_or_create_key() if self.config.encrypt_at_rest else None
        self.chain = self._load_chain()
        self._replay_user_index()
        self.miners = self._load_miners()
        self.db = EnrollmentDb(self.data_dir / "users")
        self.weights = self._load_or_create_weights()
        self.sessions_path = self.data_dir / "sessions.jsonl"
        self._embedding_cache: dict[bytes, np.ndarray] = {}

    # -- state loading --------------------------------------------------------

    def _load_or_create_key(self) -> EncryptionKey:
        if self.config.storage_key_hex:
            return EncryptionKey(bytes.fromhex(self.config.storage_key_hex))
        key_path = self.data_dir / "store.key"
        if key_path.exists():
            return EncryptionKey(bytes.fromhex(key_path.read_text().strip()))
        secret = secrets.token_bytes(32)
        key_path.write_text(secret.hex() + "\n")
        return EncryptionKey(secret)

    def _load_chain(self) -> Chain:
        path = self.data_dir / "chain.jsonl"
        if path.exists():
            return import_chain_file(path)
        return Chain()

    def _replay_user_index(self) -> None:
        path = self.data_dir / "user_index.jsonl"
        if not path.exists():
            return
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    doc = json.loads(line)
                    self.chain.map_user(doc["user_id"], bytes.fromhex(doc["tx_hash"]))

    def _load_miners(self) -> list[MinerProfile]:
        path = self.data_dir / "miners.json"
        if path.exists():
            return miners_from_json(path.read_text())
        miners = [
            MinerProfile(
                miner_id=f"miner-{i:02d}",
                compute_power=4.0,
                balance=10.0,
                consecutive_blocks=0,
                bandwidth_usage=100.0,
                storage_usage=100.0,
            )
            for i in range(3)
        ]
        path.write_text(miners_to_json(miners))
        return miners

    def _load_or_create_weights(self) -> StageWeights:
        path = self.data_dir / "weights.fbw"
        if path.exists():
            return load_weights(path)
        weights = random_weights(self.config.seed)
        save_weights(weights, path)
        return weights

    # -- persistence ------------------------------------------------------------

    def _append_chain_line(self, tx_hash: bytes, record: TransactionRecord) -> None:
        with open(self.data_dir / "chain.jsonl", "a") as fh:
            fh.write(record_to_jsonl_line(tx_hash, record) + "\n")

    def _append_user_index(self, user_id: str, tx_hash: bytes) -> None:
        with open(self.data_dir / "user_index.jsonl", "a") as fh:
            fh.write(
                json.dumps({"user_id": user_id, "tx_hash": tx_hash.hex()}) + "\n"
            )

    def _save_miners(self) -> None:
        (self.data_dir / "miners.json").write_text(miners_to_json(self.miners))

    def _log(self, doc: dict) -> None:
        doc = {"timestamp": int(self.clock()), **doc}
        with open(self.sessions_path, "a") as fh:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")

    # -- blob helpers -----------------------------------------------------------

    def _put_blob(self, data: bytes, created: list[ContentId]) -> ContentId:
        """Store a blob, remembering ids this call created so a failed
        registration can undo them without touching pre-existing objects."""
        if self.key is None:
            cid = ContentId.for_bytes(data)
            existed = self.store.contains(cid)
            self.store.put(data)
            if not existed:
                created.append(cid)
            return cid
        # a fresh nonce makes every envelope new, so it is always ours to undo
        cid = self.store.put_encrypted(data, self.key)
        created.append(cid)
        return cid

    def _get_blob(self, cid: ContentId) -> bytes:
        if self.key is None:
            return self.store.get(cid)
        return self.store.get_decrypted(cid, self.key)

    def frame_embedding(self, frame: GrayImage) -> np.ndarray:
        """Embedding for a frame, memoized on the exact pixel bytes."""
        digest = hashlib.sha256(frame.pixels.tobytes()).digest()
        cached = self._embedding_cache.get(digest)
        if cached is None:
            cached = embedding_from_frame(frame, self.weights, self.config.face)
            self._embedding_cache[digest] = cached
        return cached

    def probe_snapshot(self) -> tuple[int, int, int]:
        """(user_lookups, tx_lookups, store_gets) so far."""
        return (
            self.chain.counters.user_lookups,
            self.chain.counters.tx_lookups,
            self.store.get_count,
        )

    # -- registration -------------------------------------------------------------

    def register_user(
        self,
        name: str,
        dob: str,
        email: str,
        phone: str,
        video_dir: str | Path,
        recordings: list[AudioSignal],
    ) -> RegistrationResult:
        user_id = derive_user_id(name, dob, email, phone)
        if self.chain.has_user(user_id) or user_id in self.db:
            raise DuplicateUser(user_id)
        frames = load_video_frames(video_dir)
        video_blob = pack_video_dir(video_dir)
        index = min(self.config.login_frame_index, len(frames) - 1)
        embedding = self.frame_embedding(frames[index])
        entry = enroll(
            user_id,
            recordings,
            self.config.features,
            policy=self.config.k_policy,
            min_frames=self.config.enroll_min_frames,
            init_seed=self.config.seed,
        )
        entry.extras["face_embedding"] = [float(v) for v in embedding]
        record_doc = {
            "user_id": user_id,
            "name": name,
            "dob": dob,
            "email": email,
            "phone": phone,
            "frame_count": len(frames),
        }
        return self._store_and_append(user_id, record_doc, video_blob, entry=entry)

    def restore_user(
        self,
        user_id: str,
        record_doc: dict,
        video: bytes,
        voice_doc: dict,
    ) -> RegistrationResult:
        """Import a prebuilt record, skipping the biometric pipelines.

        Bulk-migration path: same blobs, same transaction shape, same commit
        point as register_user, but the caller supplies the artifacts.
        """
        if self.chain.has_user(user_id):
            raise DuplicateUser(user_id)
        return self._store_and_append(
            user_id, dict(record_doc), video, entry=None, voice_doc=voice_doc
        )

    def _store_and_append(
        self,
        user_id: str,
        record_doc: dict,
        video_blob: bytes,
        entry: UserEntry | None,
        voice_doc: dict | None = None,
    ) -> RegistrationResult:
        if entry is not None:
            voice_bytes = entry_to_json(entry).encode()
        else:
            voice_bytes = json.dumps(voice_doc or {}, sort_keys=True).encode()
        created: list[ContentId] = []
        try:
            video_cid = self._put_blob(video_blob, created)
            voice_cid = self._put_blob(voice_bytes, created)
            record_doc = {
                **record_doc,
                "user_id": user_id,
                "video_cid": str(video_cid),
                "voice_cid": str(voice_cid),
            }
            record_bytes = json.dumps(record_doc, sort_keys=True).encode()
            record_cid = self._put_blob(record_bytes, created)
            miner = select_miner(
                self.miners,
                self.config.consensus,
                round_seed_for(self.config.seed, self.chain.height),
            )
            record = TransactionRecord(
                sender_address=sender_for(user_id),
                timestamp=int(self.clock()),
                block_number=self.chain.height,
                data_hash=record_cid.digest,
                nonce=self.chain.height,
                previous_hash=self.chain.tip,
            )
        except BaseException:
            for cid in created:
                self.store.discard(cid)
            raise
        # commit point: nothing below can fail short of the process dying
        tx_hash = self.chain.store_transaction(record)
        self.chain.map_user(user_id, tx_hash)
        self._append_chain_line(tx_hash, record)
        self._append_user_index(user_id, tx_hash)
        apply_win(self.miners, miner.miner_id)
        self._save_miners()
        if entry is not None:
            self.db.add(entry, replace=True)
        self._log(
            {
                "event": "register",
                "user_id": user_id,
                "tx_hash": tx_hash.hex(),
                "miner_id": miner.miner_id,
            }
        )
        return RegistrationResult(
            user_id=user_id,
            tx_hash=tx_hash,
            record_cid=record_cid,
            video_cid=video_cid,
            voice_cid=voice_cid,
            miner_id=miner.miner_id,
        )

    def update_voice(self, user_id: str, recordings: list[AudioSignal]) -> RegistrationResult:
        """Re-enroll a user's voice; appends a fresh transaction (latest wins)."""
        old_entry = self.db.get(user_id)
        current = self.retrieve_record(user_id)
        entry = enroll(
            user_id,
            recordings,
            self.config.features,
            policy=self.config.k_policy,
            min_frames=self.config.enroll_min_frames,
            init_seed=self.config.seed,
        )
        entry.extras = dict(old_entry.extras)
        record_doc = {
            k: v
            for k, v in current.record.items()
            if k not in ("video_cid", "voice_cid")
        }
        return self._store_and_append(
            user_id, record_doc, current.video, entry=entry
        )

    # -- login ---------------------------------------------------------------------

    def login(
        self, user_id: str, frame: GrayImage, sample: AudioSignal
    ) -> LoginSession:
        if not self.chain.has_user(user_id):
            raise UnknownUser(user_id)
        session = LoginSession(user_id=user_id, stage=LoginStage.VIDEO_PENDING)
        entry = self.db.get(user_id)
        stored = np.asarray(entry.extras["face_embedding"], dtype=np.float64)
        probe = self.frame_embedding(frame)
        decision = verify(probe, stored, self.config.face.theta)
        session.similarity = decision.similarity
        if not decision.accepted:
            session.stage = LoginStage.DENIED
            session.reason = "face mismatch"
            self._log_session(session)
            return session
        session.stage = LoginStage.VOICE_PENDING
        auth = authenticate(sample, self.db, self.config.voice, self.config.features)
        session.voice_scores = auth.scores
        session.voice_best_user = auth.best_user
        session.voice_best_score = auth.best_score
        if auth.accepted_user == user_id:
            session.stage = LoginStage.GRANTED
            session.paraphrase = generate_paraphrase(self._paraphrase_seed(user_id))
        else:
            session.stage = LoginStage.DENIED
            session.reason = (
                "voice mismatch" if auth.best_user != user_id else "voice below threshold"
            )
        self._log_session(session)
        return session

    def _paraphrase_seed(self, user_id: str) -> int:
        material = user_id.encode() + struct.pack(">Q", int(self.clock()) & _U64_MASK)
        return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")

    def _log_session(self, session: LoginSession) -> None:
        self._log(
            {
                "event": "login",
                "user_id": session.user_id,
                "stage": session.stage.value,
                "similarity": session.similarity,
                "voice_best_user": session.voice_best_user,
                "voice_best_score": session.voice_best_score,
                "reason": session.reason,
            }
        )

    # -- retrieval -------------------------------------------------------------------

    def retrieve_record(self, user_id: str) -> RetrievedRecord:
        """Constant-probe walk: user index, transaction, then three blob reads."""
        tx_hash = self.chain.get_transaction_hash(user_id)
        tx = self.chain.get_transaction(tx_hash)
        record = json.loads(self._get_blob(ContentId(tx.data_hash)))
        video = self._get_blob(ContentId.parse(record["video_cid"]))
        voice = json.loads(self._get_blob(ContentId.parse(record["voice_cid"])))
        return RetrievedRecord(user_id=user_id, record=record, video=video, voice=voice)

    # -- maintenance -------------------------------------------------------------------

    def validate(self) -> ValidationReport:
        return validate_chain(self.chain)

    def export_chain(self, path: str | Path) -> None:
        export_chain_file(self.chain, path)
