"""Command-line entry points: train | evaluate | explain | synth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import data, synth
from .metrics import evaluate
from .train import TrainConfig, load_checkpoint, save_checkpoint, train

log = logging.getLogger("cfdet")


def _config_from_args(args: argparse.Namespace) -> TrainConfig:
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        config.seed = args.seed
    return config


def _split_graphs(args: argparse.Namespace):
    graphs = data.load_dataset(args.data)
    if args.splits:
        assignments = data.load_split_plan(args.splits)
        if args.fold is not None:
            return data.fold_partition(graphs, assignments, args.fold)
        return data.partition(graphs, assignments)
    return {"train": graphs, "val": [], "test": graphs}


def cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    parts = _split_graphs(args)
    result = train(parts["train"], config)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result, outdir / "model.pt")
    (outdir / "config.json").write_text(json.dumps(result.config.__dict__, indent=2))
    (outdir / "curves.json").write_text(json.dumps(result.curves, indent=2))
    last = result.curves[-1] if result.curves else {}
    print(
        f"trained on {len(parts['train'])} graphs; "
        f"final loss {last.get('loss', float('nan')):.4f}, "
        f"mi estimate {last.get('mi', float('nan')):.4f}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    result = load_checkpoint(args.model)
    parts = _split_graphs(args)
    subset = parts[args.split]
    if not subset:
        print(f"error: split {args.split!r} is empty", file=sys.stderr)
        return 2
    scores, _ = evaluate(result.detector, subset)
    payload = scores.to_obj()
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_explain(args: argparse.Namespace) -> int:
    result = load_checkpoint(args.model)
    graphs = data.load_dataset(args.data)
    if not graphs:
        print("error: no graphs found", file=sys.stderr)
        return 2
    outdir = Path(args.out or "explanations")
    outdir.mkdir(parents=True, exist_ok=True)
    for g in graphs:
        _, _, expl = result.detector.predict_explain(g)
        path = outdir / f"{g.contract_id}.explanation.json"
        path.write_text(json.dumps(expl.to_obj(g.contract_id), indent=2, sort_keys=True))
    print(f"wrote {len(graphs)} explanations to {outdir}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    corpus = synth.make_corpus(args.n, args.seed or 0)
    synth.write_corpus(corpus, args.out, seed=args.seed or 0)
    positives = sum(g.label for g in corpus)
    print(f"wrote {len(corpus)} graphs ({positives} positive) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfdet",
        description="Train and run the self-explaining dependence-graph classifier.",
    )
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a detector")
    p.add_argument("--data", nargs="+", required=True, help="graph JSON files/dirs")
    p.add_argument("--splits", help="split-plan JSON")
    p.add_argument("--fold", type=int, help="test fold for k-fold plans")
    p.add_argument("--config", help="config JSON overriding the defaults")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained detector")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--splits", help="split-plan JSON")
    p.add_argument("--fold", type=int)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--out", help="metrics JSON output path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="emit per-graph explanation JSON")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("synth", help="generate the synthetic motif corpus")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    try:
        return args.func(args)
    except (data.DatasetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
