"""End-to-end application flows over a small synthetic corpus.

The untrained seeded network produces degenerate in-frame detections, so these
tests pin pnet_score_min to 1.0: every frame embedding then comes from the
deterministic whole-frame path, which is what the corpus flows calibrate
against in practice.
"""

import json

import numpy as np
import pytest

import biovault.workflows as workflows
from biovault.config import SystemConfig
from biovault.errors import DuplicateUser, InsufficientAudio, UnknownUser
from biovault.face.pipeline import VerifyConfig
from biovault.ledger import import_chain_file
from biovault.synthetic import CorpusSpec, generate_corpus
from biovault.voice.audio import load_wav
from biovault.voice.speaker import AuthConfig
from biovault.workflows import (
    PARAPHRASE_WORDS,
    App,
    LoginStage,
    derive_user_id,
    generate_paraphrase,
    load_video_frames,
    pack_video_dir,
    sender_for,
    unpack_video,
)

SPEC = CorpusSpec(
    n_users=3,
    frames_per_user=2,
    recordings_per_user=2,
    frame_size=64,
    recording_seconds=1.0,
    seed=0,
)


def corpus_config() -> SystemConfig:
    return SystemConfig(
        face=VerifyConfig(pnet_score_min=1.0, theta=0.95),
        voice=AuthConfig(tau=-1e9),
    )


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return generate_corpus(root, SPEC)


@pytest.fixture(scope="module")
def app(corpus, tmp_path_factory):
    """One app with every corpus user registered; read-only for most tests."""
    the_app = App(tmp_path_factory.mktemp("data"), config=corpus_config())
    results = {}
    for user in corpus.users:
        recordings = [load_wav(p) for p in user.recordings]
        results[user.index] = the_app.register_user(
            user.name, user.dob, user.email, user.phone, user.video_dir, recordings
        )
    return the_app, results


def user_frames(corpus, index):
    return load_video_frames(corpus.users[index].video_dir)


def user_audio(corpus, index, rec=0):
    return load_wav(corpus.users[index].recordings[rec])


# -- identity helpers ---------------------------------------------------------


def test_derive_user_id_format_and_stability():
    uid = derive_user_id("A", "1990-01-01", "a@x", "+1")
    assert uid.startswith("u") and len(uid) == 17
    assert int(uid[1:], 16) >= 0
    assert uid == derive_user_id("A", "1990-01-01", "a@x", "+1")
    assert uid != derive_user_id("B", "1990-01-01", "a@x", "+1")


def test_sender_for_is_twenty_bytes():
    sender = sender_for("u0123456789abcdef")
    assert len(sender) == 20
    assert sender == sender_for("u0123456789abcdef")


def test_paraphrase_words_cover_every_byte():
    assert len(PARAPHRASE_WORDS) == 256
    assert len(set(PARAPHRASE_WORDS)) == 256


def test_generate_paraphrase_draws_from_word_list():
    phrase = generate_paraphrase(42)
    words = phrase.split(" ")
    assert len(words) == 6
    assert all(w in PARAPHRASE_WORDS for w in words)
    assert phrase == generate_paraphrase(42)
    assert phrase != generate_paraphrase(43)
    assert generate_paraphrase(7) == generate_paraphrase(7 + 2**64)


# -- video packing ---------------------------------------------------------------


def test_pack_video_dir_is_deterministic(corpus, tmp_path):
    blob = pack_video_dir(corpus.users[0].video_dir)
    assert blob == pack_video_dir(corpus.users[0].video_dir)
    # same frame bytes in a different directory with fresh mtimes: same archive
    src = corpus.users[0].video_dir
    copy_dir = tmp_path / "copy"
    copy_dir.mkdir()
    for path in sorted(__import__("pathlib").Path(src).glob("*.pgm")):
        (copy_dir / path.name).write_bytes(path.read_bytes())
    assert pack_video_dir(copy_dir) == blob


def test_pack_unpack_roundtrip(corpus):
    blob = pack_video_dir(corpus.users[1].video_dir)
    members = unpack_video(blob)
    assert sorted(members) == ["frame_000.pgm", "frame_001.pgm"]
    from pathlib import Path

    for name, data in members.items():
        assert data == (Path(corpus.users[1].video_dir) / name).read_bytes()


def test_pack_video_dir_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        pack_video_dir(tmp_path)
    with pytest.raises(ValueError):
        load_video_frames(tmp_path)


# -- registration -----------------------------------------------------------------


def test_registration_result_and_state(app, corpus):
    the_app, results = app
    result = results[0]
    expected_id = derive_user_id(
        corpus.users[0].name,
        corpus.users[0].dob,
        corpus.users[0].email,
        corpus.users[0].phone,
    )
    assert result.user_id == expected_id
    assert len(result.tx_hash) == 32
    assert the_app.chain.has_user(result.user_id)
    assert result.user_id in the_app.db
    for cid in (result.record_cid, result.video_cid, result.voice_cid):
        assert the_app.store.contains(cid)
    embedding = the_app.db.get(result.user_id).extras["face_embedding"]
    assert len(embedding) == 512
    assert np.linalg.norm(embedding) == pytest.approx(1.0, abs=1e-9)


def test_registration_appends_audit_and_index_lines(app):
    the_app, results = app
    index_lines = [
        json.loads(line)
        for line in (the_app.data_dir / "user_index.jsonl").read_text().splitlines()
    ]
    assert {doc["user_id"] for doc in index_lines} == {
        r.user_id for r in results.values()
    }
    session_lines = [
        json.loads(line)
        for line in (the_app.data_dir / "sessions.jsonl").read_text().splitlines()
    ]
    registers = [doc for doc in session_lines if doc["event"] == "register"]
    assert len(registers) >= len(results)
    assert all("miner_id" in doc and "tx_hash" in doc for doc in registers)


def test_registration_advances_miner_state(app):
    the_app, _ = app
    # the last round's winner holds a streak; losers were reset
    assert max(m.consecutive_blocks for m in the_app.miners) >= 1
    miners_doc = json.loads((the_app.data_dir / "miners.json").read_text())
    assert len(miners_doc) == 3


def test_duplicate_registration_rejected(app, corpus):
    the_app, _ = app
    user = corpus.users[0]
    height_before = the_app.chain.height
    with pytest.raises(DuplicateUser):
        the_app.register_user(
            user.name,
            user.dob,
            user.email,
            user.phone,
            user.video_dir,
            [user_audio(corpus, 0)],
        )
    assert the_app.chain.height == height_before


def test_failed_registration_leaves_no_trace(corpus, tmp_path, monkeypatch):
    the_app = App(tmp_path / "data", config=corpus_config())
    user = corpus.users[0]
    recordings = [load_wav(p) for p in user.recordings]
    objects_dir = the_app.data_dir / "store" / "objects"

    def count_objects():
        return len([p for p in objects_dir.rglob("*") if p.is_file()])

    before = count_objects()
    # fail after the blobs are written but before the commit point
    def boom(*args, **kwargs):
        raise RuntimeError("injected miner failure")

    monkeypatch.setattr(workflows, "select_miner", boom)
    with pytest.raises(RuntimeError):
        the_app.register_user(
            user.name, user.dob, user.email, user.phone, user.video_dir, recordings
        )
    assert count_objects() == before
    assert the_app.chain.height == 0
    assert user.name not in the_app.db
    assert not (the_app.data_dir / "user_index.jsonl").exists()


def test_registration_rejects_insufficient_audio(corpus, tmp_path):
    the_app = App(tmp_path / "data", config=corpus_config())
    user = corpus.users[0]
    short = load_wav(user.recordings[0])
    short = type(short)(short.samples[:2000], short.sample_rate)
    with pytest.raises(InsufficientAudio):
        the_app.register_user(
            user.name, user.dob, user.email, user.phone, user.video_dir, [short]
        )
    assert the_app.chain.height == 0


# -- retrieval --------------------------------------------------------------------


def test_retrieve_record_contents(app, corpus):
    the_app, results = app
    result = results[1]
    retrieved = the_app.retrieve_record(result.user_id)
    assert retrieved.user_id == result.user_id
    assert retrieved.record["name"] == corpus.users[1].name
    assert retrieved.record["email"] == corpus.users[1].email
    assert retrieved.record["frame_count"] == SPEC.frames_per_user
    assert retrieved.video == pack_video_dir(corpus.users[1].video_dir)
    assert retrieved.voice["user_id"] == result.user_id
    assert retrieved.record["video_cid"] == str(result.video_cid)


def test_retrieve_uses_constant_probe_walk(app):
    the_app, results = app
    result = results[2]
    before = the_app.probe_snapshot()
    the_app.retrieve_record(result.user_id)
    after = the_app.probe_snapshot()
    assert tuple(b - a for a, b in zip(before, after)) == (1, 1, 3)


def test_retrieve_unknown_user(app):
    the_app, _ = app
    with pytest.raises(UnknownUser):
        the_app.retrieve_record("u0000000000000000")


# -- login -------------------------------------------------------------------------


def test_genuine_login_granted(app, corpus):
    the_app, results = app
    uid = results[0].user_id
    session = the_app.login(uid, user_frames(corpus, 0)[1], user_audio(corpus, 0, rec=1))
    assert session.stage == LoginStage.GRANTED
    assert session.similarity is not None and session.similarity >= 0.95
    assert session.voice_best_user == uid
    assert session.reason is None
    words = session.paraphrase.split(" ")
    assert len(words) == 6 and all(w in PARAPHRASE_WORDS for w in words)


def test_wrong_face_denied_before_voice(app, corpus, monkeypatch):
    the_app, results = app

    def forbidden(*args, **kwargs):
        raise AssertionError("voice gate ran after a face denial")

    monkeypatch.setattr(workflows, "authenticate", forbidden)
    session = the_app.login(
        results[0].user_id, user_frames(corpus, 1)[0], user_audio(corpus, 0)
    )
    assert session.stage == LoginStage.DENIED
    assert session.reason == "face mismatch"
    assert session.similarity is not None and session.similarity < 0.95
    assert session.voice_scores is None
    assert session.voice_best_user is None
    assert session.paraphrase is None


def test_wrong_voice_denied_after_face(app, corpus):
    the_app, results = app
    uid = results[0].user_id
    session = the_app.login(uid, user_frames(corpus, 0)[0], user_audio(corpus, 1))
    assert session.stage == LoginStage.DENIED
    assert session.reason == "voice mismatch"
    assert session.voice_scores is not None
    assert session.voice_best_user == results[1].user_id
    assert session.paraphrase is None


def test_login_unknown_user(app, corpus):
    the_app, _ = app
    with pytest.raises(UnknownUser):
        the_app.login("u0000000000000000", user_frames(corpus, 0)[0], user_audio(corpus, 0))


def test_login_sessions_are_logged(app, corpus):
    the_app, results = app
    uid = results[0].user_id
    the_app.login(uid, user_frames(corpus, 0)[0], user_audio(corpus, 0))
    lines = [
        json.loads(line)
        for line in (the_app.data_dir / "sessions.jsonl").read_text().splitlines()
    ]
    logins = [doc for doc in lines if doc["event"] == "login" and doc["user_id"] == uid]
    assert logins
    assert logins[-1]["stage"] == "granted"
    assert "similarity" in logins[-1]


# -- voice update -------------------------------------------------------------------


def test_update_voice_appends_and_latest_wins(corpus, tmp_path):
    the_app = App(tmp_path / "data", config=corpus_config())
    user = corpus.users[0]
    recordings = [load_wav(p) for p in user.recordings]
    result = the_app.register_user(
        user.name, user.dob, user.email, user.phone, user.video_dir, recordings
    )
    embedding_before = list(the_app.db.get(result.user_id).extras["face_embedding"])
    frames_before = the_app.db.get(result.user_id).metadata["frames"]

    updated = the_app.update_voice(result.user_id, [recordings[0]])
    assert the_app.chain.height == 2
    assert updated.tx_hash != result.tx_hash

    retrieved = the_app.retrieve_record(result.user_id)
    # the video content is carried over (its envelope is re-encrypted, so the
    # cid itself may differ)
    assert retrieved.video == pack_video_dir(user.video_dir)
    assert retrieved.voice["metadata"]["frames"] < frames_before  # new model stored
    assert the_app.db.get(result.user_id).extras["face_embedding"] == embedding_before
    # latest mapping wins in the on-disk index too
    lines = (the_app.data_dir / "user_index.jsonl").read_text().splitlines()
    assert json.loads(lines[-1])["tx_hash"] == updated.tx_hash.hex()


def test_update_voice_unknown_user(corpus, tmp_path):
    the_app = App(tmp_path / "data", config=corpus_config())
    with pytest.raises(UnknownUser):
        the_app.update_voice("u0000000000000000", [user_audio(corpus, 0)])


# -- restart and maintenance ---------------------------------------------------------


def test_app_state_survives_restart(corpus, tmp_path):
    data_dir = tmp_path / "data"
    cfg = corpus_config()
    first = App(data_dir, config=cfg)
    user = corpus.users[0]
    recordings = [load_wav(p) for p in user.recordings]
    result = first.register_user(
        user.name, user.dob, user.email, user.phone, user.video_dir, recordings
    )

    second = App(data_dir, config=cfg)
    assert second.chain.height == 1
    assert second.chain.has_user(result.user_id)
    assert result.user_id in second.db
    retrieved = second.retrieve_record(result.user_id)
    assert retrieved.video == pack_video_dir(user.video_dir)
    np.testing.assert_array_equal(
        second.weights.arrays["embed.fc.w"], first.weights.arrays["embed.fc.w"]
    )
    session = second.login(result.user_id, user_frames(corpus, 0)[0], recordings[0])
    assert session.stage == LoginStage.GRANTED


def test_validate_and_export_chain(app, tmp_path):
    the_app, _ = app
    report = the_app.validate()
    assert report.ok
    assert not report.issues
    out = tmp_path / "chain.jsonl"
    the_app.export_chain(out)
    imported = import_chain_file(out)
    assert imported.height == the_app.chain.height
    assert imported.tip == the_app.chain.tip


def test_plaintext_store_when_encryption_disabled(corpus, tmp_path):
    cfg = SystemConfig(
        face=VerifyConfig(pnet_score_min=1.0, theta=0.95),
        voice=AuthConfig(tau=-1e9),
        encrypt_at_rest=False,
    )
    the_app = App(tmp_path / "data", config=cfg)
    user = corpus.users[0]
    recordings = [load_wav(p) for p in user.recordings]
    result = the_app.register_user(
        user.name, user.dob, user.email, user.phone, user.video_dir, recordings
    )
    # raw store bytes parse directly: nothing was wrapped in an envelope
    raw = the_app.store.get(result.record_cid)
    doc = json.loads(raw)
    assert doc["user_id"] == result.user_id
    assert not (the_app.data_dir / "store.key").exists()
    assert the_app.retrieve_record(result.user_id).record == doc


def test_injected_key_skips_key_file(corpus, tmp_path):
    cfg = SystemConfig(
        face=VerifyConfig(pnet_score_min=1.0, theta=0.95),
        voice=AuthConfig(tau=-1e9),
        storage_key_hex="11" * 32,
    )
    the_app = App(tmp_path / "data", config=cfg)
    user = corpus.users[1]
    recordings = [load_wav(p) for p in user.recordings]
    the_app.register_user(
        user.name, user.dob, user.email, user.phone, user.video_dir, recordings
    )
    assert not (the_app.data_dir / "store.key").exists()


def test_injected_clock_stamps_transactions(corpus, tmp_path):
    the_app = App(tmp_path / "data", config=corpus_config(), clock=lambda: 1234.5)
    user = corpus.users[0]
    recordings = [load_wav(p) for p in user.recordings]
    result = the_app.register_user(
        user.name, user.dob, user.email, user.phone, user.video_dir, recordings
    )
    tx = the_app.chain.get_transaction(result.tx_hash)
    assert tx.timestamp == 1234
    lines = (the_app.data_dir / "sessions.jsonl").read_text().splitlines()
    assert json.loads(lines[-1])["timestamp"] == 1234
