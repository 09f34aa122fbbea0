"""Command-line interface.

Exit codes: 0 on success, 1 for domain and I/O failures (message on stderr),
2 for usage errors (argparse). A denied login is a successful evaluation, not
an error. The FBT_SEED environment variable overrides every seed source.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .bench import BenchSpec, run_bench, write_csv
from .calibrate import calibrate_app
from .config import SystemConfig, load_config, resolve_seed, save_config
from .consensus import load_scenario, run_rounds, stats_rows, write_stats_csv
from .errors import BiovaultError
from .face.image import load_pgm
from .face.pipeline import VerifyConfig, embedding_from_frame, verify
from .face.weights import load_weights, random_weights
from .synthetic import CorpusSpec, generate_corpus, load_manifest
from .voice.audio import load_wav
from .workflows import App


def _system_config(args: argparse.Namespace) -> SystemConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else SystemConfig()
    default = getattr(args, "seed", None)
    if default is None:
        default = cfg.seed
    return replace(cfg, seed=resolve_seed(default))


def _print_json(doc: dict) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _cmd_register(args: argparse.Namespace) -> int:
    app = App(args.data_dir, _system_config(args))
    recordings = [load_wav(p) for p in args.audio]
    result = app.register_user(
        args.name, args.dob, args.email, args.phone, args.video_dir, recordings
    )
    _print_json(
        {
            "user_id": result.user_id,
            "tx_hash": result.tx_hash.hex(),
            "record_cid": str(result.record_cid),
            "video_cid": str(result.video_cid),
            "voice_cid": str(result.voice_cid),
            "miner_id": result.miner_id,
        }
    )
    return 0


def _cmd_login(args: argparse.Namespace) -> int:
    app = App(args.data_dir, _system_config(args))
    session = app.login(args.user_id, load_pgm(args.frame), load_wav(args.audio))
    _print_json(
        {
            "user_id": session.user_id,
            "stage": session.stage.value,
            "similarity": session.similarity,
            "voice_best_user": session.voice_best_user,
            "voice_best_score": session.voice_best_score,
            "paraphrase": session.paraphrase,
            "reason": session.reason,
        }
    )
    return 0


def _cmd_retrieve(args: argparse.Namespace) -> int:
    app = App(args.data_dir, _system_config(args))
    result = app.retrieve_record(args.user_id)
    _print_json(result.record)
    if args.video_out:
        Path(args.video_out).write_bytes(result.video)
    return 0


def _cmd_enroll_voice(args: argparse.Namespace) -> int:
    app = App(args.data_dir, _system_config(args))
    recordings = [load_wav(p) for p in args.audio]
    result = app.update_voice(args.user_id, recordings)
    _print_json(
        {
            "user_id": result.user_id,
            "tx_hash": result.tx_hash.hex(),
            "record_cid": str(result.record_cid),
            "voice_cid": str(result.voice_cid),
        }
    )
    return 0


def _cmd_verify_face(args: argparse.Namespace) -> int:
    if args.weights:
        weights = load_weights(args.weights)
    else:
        weights = random_weights(resolve_seed(args.seed))
    cfg = VerifyConfig()
    emb_a = embedding_from_frame(load_pgm(args.image_a), weights, cfg)
    emb_b = embedding_from_frame(load_pgm(args.image_b), weights, cfg)
    decision = verify(emb_a, emb_b, args.theta)
    _print_json(
        {
            "similarity": decision.similarity,
            "accepted": decision.accepted,
            "theta": decision.theta,
        }
    )
    return 0


def _cmd_consensus_sim(args: argparse.Namespace) -> int:
    miners, params, rounds, seed = load_scenario(args.scenario)
    stats = run_rounds(miners, params, rounds, resolve_seed(seed))
    for miner_id, wins, fraction in stats_rows(stats):
        print(f"{miner_id}\t{wins}\t{fraction:.6f}")
    if stats.skipped_rounds:
        print(f"(skipped {stats.skipped_rounds} of {stats.rounds} rounds)")
    if args.out:
        write_stats_csv(stats, args.out)
    if args.plot:
        from .plots import render_consensus_plot

        render_consensus_plot(args.out, args.plot)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    spec = BenchSpec(
        sizes=tuple(args.sizes),
        reps=args.reps,
        tps_transactions=args.transactions,
        seed=resolve_seed(args.seed),
    )
    rows = run_bench(spec, args.workdir)
    write_csv(rows, args.out)
    for row in rows:
        if row.dimension == "claim":
            print(f"{row.metric}: {'true' if row.measure else 'false'}")
    if args.plot_dir:
        from .plots import render_bench_plots

        for path in render_bench_plots(args.out, args.plot_dir):
            print(f"wrote {path}")
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    cfg = _system_config(args)
    if not args.config:
        # untrained weights make detector proposals meaningless, so calibrate
        # the gates on the deterministic whole-frame embedding route
        cfg = replace(cfg, face=replace(cfg.face, pnet_score_min=1.0))
    if args.synthetic:
        manifest = generate_corpus(workdir / "corpus", CorpusSpec(seed=cfg.seed))
    else:
        manifest = load_manifest(args.corpus)
    app = App(workdir / "app", cfg)
    for user in manifest.users:
        recordings = [load_wav(p) for p in user.recordings]
        app.register_user(
            user.name, user.dob, user.email, user.phone, user.video_dir, recordings
        )
    calibration = calibrate_app(app, manifest)
    _print_json(
        {
            "face": {
                "theta": calibration.face.threshold,
                "far": calibration.face.far,
                "frr": calibration.face.frr,
                "separable": calibration.face.separable,
            },
            "voice": {
                "tau": calibration.voice.threshold,
                "far": calibration.voice.far,
                "frr": calibration.voice.frr,
                "separable": calibration.voice.separable,
            },
        }
    )
    if args.write_config:
        patched = replace(
            cfg,
            face=replace(cfg.face, theta=calibration.face.threshold),
            voice=replace(cfg.voice, tau=calibration.voice.threshold),
        )
        save_config(patched, args.write_config)
        print(f"wrote {args.write_config}")
    return 0


def _cmd_export_chain(args: argparse.Namespace) -> int:
    app = App(args.data_dir, _system_config(args))
    app.export_chain(args.out)
    print(f"wrote {args.out} ({app.chain.height} transactions)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biovault",
        description="Chain-anchored records behind face and voice gates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--data-dir", required=True, help="application state directory")
        p.add_argument("--config", help="SystemConfig JSON file")
        p.add_argument("--seed", type=int, help="seed override (FBT_SEED wins)")

    p = sub.add_parser("register", help="register a user from a video and recordings")
    add_common(p)
    p.add_argument("--name", required=True)
    p.add_argument("--dob", required=True)
    p.add_argument("--email", required=True)
    p.add_argument("--phone", required=True)
    p.add_argument("--video-dir", required=True, help="directory of .pgm frames")
    p.add_argument("--audio", nargs="+", required=True, help="enrollment .wav files")
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("login", help="two-stage login: face gate, then voice gate")
    add_common(p)
    p.add_argument("--user-id", required=True)
    p.add_argument("--frame", required=True, help="login frame (.pgm)")
    p.add_argument("--audio", required=True, help="login sample (.wav)")
    p.set_defaults(func=_cmd_login)

    p = sub.add_parser("retrieve", help="fetch a user's record, video, and voice model")
    add_common(p)
    p.add_argument("--user-id", required=True)
    p.add_argument("--video-out", help="write the video tar here")
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("enroll-voice", help="re-enroll a user's voice model")
    add_common(p)
    p.add_argument("--user-id", required=True)
    p.add_argument("--audio", nargs="+", required=True)
    p.set_defaults(func=_cmd_enroll_voice)

    p = sub.add_parser("verify-face", help="compare two images' embeddings")
    p.add_argument("--image-a", required=True)
    p.add_argument("--image-b", required=True)
    p.add_argument("--weights", help="weights file; seeded random when omitted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=0.5)
    p.set_defaults(func=_cmd_verify_face)

    p = sub.add_parser("consensus-sim", help="run a miner-selection scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", help="write per-miner stats CSV here")
    p.add_argument("--plot", help="write a wins bar chart SVG here (needs --out)")
    p.set_defaults(func=_cmd_consensus_sim)

    p = sub.add_parser("bench", help="storage benchmarks and verdicts")
    p.add_argument("--workdir", required=True, help="scratch directory for runs")
    p.add_argument("--out", required=True, help="benchmark CSV path")
    p.add_argument("--sizes", nargs="+", type=int, default=[1024, 1048576])
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--transactions", type=int, default=50, help="appends per TPS rep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot-dir", help="also render SVG figures into this directory")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("calibrate", help="calibrate both gate thresholds on a corpus")
    p.add_argument("--workdir", required=True, help="scratch directory")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--corpus", help="existing corpus root (manifest.json inside)")
    group.add_argument(
        "--synthetic", action="store_true", help="generate the synthetic corpus first"
    )
    p.add_argument("--config", help="SystemConfig JSON file")
    p.add_argument("--seed", type=int, help="seed override (FBT_SEED wins)")
    p.add_argument("--write-config", help="write a config with calibrated thresholds")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("export-chain", help="export the transaction log as JSONL")
    add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_chain)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "consensus-sim" and args.plot and not args.out:
        parser.error("--plot requires --out")
    try:
        return args.func(args)
    except BiovaultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
