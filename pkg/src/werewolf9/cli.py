"""Command-line entry points: train, eval, gen-data, replay, score, serve."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import engine as E
from .arena import AgentSpec, behavior_score, head_to_head, play_faction_match, play_match

CONFIG_ENV = "WEREWOLF9_CONFIG"


def _parse_spec(text: str) -> AgentSpec:
    """'random' | 'scripted' | 'thinker:PATH[:temp]'"""
    parts = text.split(":")
    kind = parts[0]
    if kind in ("random", "scripted"):
        return AgentSpec(kind=kind, name=text)
    if kind == "thinker":
        if len(parts) < 2:
            raise ValueError("thinker spec needs a checkpoint path")
        temp = float(parts[2]) if len(parts) > 2 else 0.5
        return AgentSpec(kind="thinker", checkpoint=parts[1], temperature=temp,
                         name=text)
    raise ValueError(f"unknown agent spec {text!r}")


def _parse_seats(text: str) -> list[list[AgentSpec]]:
    """'random*9' or 'thinker:ck.npz*4,scripted*5' -> nine seat pools."""
    seats: list[list[AgentSpec]] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if "*" in chunk:
            spec_text, count = chunk.rsplit("*", 1)
            n = int(count)
        else:
            spec_text, n = chunk, 1
        spec = _parse_spec(spec_text)
        seats.extend([spec] for _ in range(n))
    if len(seats) != 9:
        raise ValueError(f"seat specs cover {len(seats)} seats, need 9")
    return seats


def cmd_train(args) -> int:
    from .policy.thinker import ThinkerConfig
    from .training import Trainer, TrainerConfig, load_config

    config_path = args.config or os.environ.get(CONFIG_ENV)
    if config_path:
        if not Path(config_path).exists():
            print(f"config not found: {config_path}", file=sys.stderr)
            return 2
        cfg = load_config(config_path)
    else:
        cfg = TrainerConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.bc_data and not Path(args.bc_data).exists():
        print(f"bc data not found: {args.bc_data}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trainer = Trainer(cfg, bc_source=args.bc_data,
                      metrics_path=out / "metrics.jsonl")

    def progress(info):
        print(f"iter {info['iteration']}: {info['samples']} samples, "
              f"{info['episodes']} episodes, {info['elapsed']:.0f}s", flush=True)

    trainer.train(target_samples=args.samples, max_iterations=args.iterations,
                  progress=progress if args.verbose else None)
    paths = trainer.save_checkpoints(out)
    print(f"wrote {len(paths)} checkpoints and metrics to {out}")
    return 0


def cmd_gen_data(args) -> int:
    from .training import gen_scripted_dataset
    paths = gen_scripted_dataset(args.n, args.seed, args.out)
    print(f"wrote {len(paths)} replay logs to {args.out}")
    return 0


def cmd_replay(args) -> int:
    path = Path(args.log)
    if not path.exists():
        print(f"log not found: {path}", file=sys.stderr)
        return 2
    with open(path) as fp:
        log = E.read_log(fp)
    try:
        game = E.verify_replay(log)
    except E.ReplayMismatch as exc:
        print(f"replay mismatch: {exc}", file=sys.stderr)
        return 1
    print(f"verified: {len(log.events)} events, winner {game.winner.value}")
    return 0


def cmd_score(args) -> int:
    path = Path(args.log)
    if not path.exists():
        print(f"log not found: {path}", file=sys.stderr)
        return 2
    with open(path) as fp:
        log = E.read_log(fp)
    card = behavior_score(log)
    for seat in E.SEATS:
        role = log.roles[seat].value
        items = " ".join(f"{r}:{d:+.1f}" for r, d in card.entries.get(seat, ()))
        print(f"seat {seat} ({role:9s}) total {card.total(seat):+.1f}  {items}")
    if args.json:
        print(json.dumps({s: card.total(s) for s in E.SEATS}))
    return 0


def cmd_eval(args) -> int:
    if args.good or args.wolf:
        if not (args.good and args.wolf):
            print("faction match needs both --good and --wolf", file=sys.stderr)
            return 2
        report = play_faction_match(_parse_spec(args.good), _parse_spec(args.wolf),
                                    args.n_games, args.seed)
    elif args.composition:
        a_text, b_text, counts = args.composition.split(";")
        n_a, n_b = (int(x) for x in counts.split(","))
        report = head_to_head([_parse_spec(a_text)], [_parse_spec(b_text)],
                              (n_a, n_b), args.n_games, args.seed)
    else:
        seats_text = args.seats or (f"thinker:{args.checkpoint}*9" if args.checkpoint
                                    else "random*9")
        report = play_match(_parse_seats(seats_text), args.n_games, args.seed)
    print(report.table())
    print(json.dumps(report.to_json()))
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app
    host, _, port = args.bind.partition(":")
    defaults = {}
    if args.checkpoint:
        defaults["checkpoint"] = args.checkpoint
    app = create_app(defaults)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000),
                log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="werewolf9",
        description="9-player Werewolf self-play framework")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the actor/learner loop")
    p.add_argument("--config", help=f"trainer config JSON (or ${CONFIG_ENV})")
    p.add_argument("--bc-data", help="directory of replay logs for cloning episodes")
    p.add_argument("--out", default="runs/latest")
    p.add_argument("--samples", type=int, help="stop after this many samples")
    p.add_argument("--iterations", type=int, help="stop after this many iterations")
    p.add_argument("--seed", type=int)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("gen-data", help="write scripted-agent replay logs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("replay", help="re-simulate a log and verify it")
    p.add_argument("--log", required=True)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("score", help="behavior scores for a finished log")
    p.add_argument("--log", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("eval", help="run matches and print the report")
    p.add_argument("--n-games", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", help="fill all seats with this thinker")
    p.add_argument("--seats", help="per-seat specs, e.g. 'thinker:ck.npz*4,random*5'")
    p.add_argument("--good", help="faction match: spec for good seats")
    p.add_argument("--wolf", help="faction match: spec for wolf seats")
    p.add_argument("--composition", help="head-to-head 'specA;specB;nA,nB'")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP game service")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--checkpoint", help="default thinker checkpoint for AI seats")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
