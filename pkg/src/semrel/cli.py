"""Command-line surface.

Commands: build | stats | perturb | export-dot | fetch | split.
Exit codes: 0 success, 2 usage/input error, 3 internal invariant violation.
All randomness funnels through --seed; batch output files are written
atomically (temp + rename).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Optional

from . import graphio, ingest, perturb, report
from .errors import SemrelError, SchemaError
from .srg import SRG, build_srg

log = logging.getLogger("semrel")

RPC_URL_ENV = "SEASONED_RPC_URL"


class UsageError(Exception):
    """Input or usage problem; maps to exit code 2."""


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_graphs(paths: Iterable[str]) -> list[tuple[Path, SRG]]:
    graphs: list[tuple[Path, SRG]] = []
    for raw in paths:
        p = Path(raw)
        candidates = sorted(p.glob("*.json")) if p.is_dir() else [p]
        for c in candidates:
            try:
                graphs.append((c, graphio.from_json(c.read_bytes())))
            except (OSError, SchemaError) as exc:
                log.warning("skipping %s: %s", c, exc)
    return graphs


def _build_one(args: tuple[str, bytes, Optional[int], str]) -> tuple[str, Optional[str]]:
    cid, code, label, outdir = args
    try:
        g = ingest.ContractRecord(id=cid, bytecode=code, label=label)
        data = graphio.to_json(build_srg(g))
        _atomic_write(Path(outdir) / f"{cid}.json", data)
        return cid, None
    except Exception as exc:  # per-file isolation
        return cid, str(exc)


def cmd_build(args: argparse.Namespace) -> int:
    records: list[tuple[str, bytes, Optional[int]]] = []
    failures: list[tuple[str, str]] = []
    if args.manifest:
        try:
            manifest = ingest.load_manifest(args.manifest)
        except SemrelError as exc:
            raise UsageError(f"cannot read manifest: {exc}") from exc
        if not len(manifest):
            raise UsageError(f"manifest {args.manifest} has no records")
        base = Path(args.manifest).parent
        for entry in manifest:
            try:
                rec = ingest.resolve_record(entry, base_dir=base)
                records.append((rec.id, rec.bytecode, rec.label))
            except SemrelError as exc:
                failures.append((entry.id, str(exc)))
    for raw in args.bytecode:
        p = Path(raw)
        try:
            records.append((p.stem, ingest.read_bytecode_file(p), None))
        except SemrelError as exc:
            failures.append((p.stem, str(exc)))
    if not records and not failures:
        raise UsageError("nothing to build; pass --manifest or bytecode files")

    outdir = args.out or "."
    ok = 0
    work = [(cid, code, label, outdir) for cid, code, label in records]
    if args.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_build_one, work))
    else:
        results = [_build_one(item) for item in work]
    for cid, err in results:
        if err is None:
            ok += 1
        else:
            failures.append((cid, err))
    for cid, err in failures:
        log.error("failed %s: %s", cid, err)
    print(f"{ok} ok, {len(failures)} failed")
    return 0 if ok else 2


def cmd_stats(args: argparse.Namespace) -> int:
    graphs = [g for _, g in _load_graphs(args.graphs)]
    if not graphs:
        raise UsageError("no valid graph files found")
    stats = report.aggregate_stats(graphs)
    if args.json:
        payload = {
            name: {
                "graph_count": s.graph_count,
                "node_count": s.node_count,
                "edge_count": s.edge_count,
                "avg_path_length": s.avg_path_length,
                "relation_ratios": s.relation_ratios,
                "top_opcodes": s.top_opcodes(),
            }
            for name, s in stats.items()
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(report.format_stats_table(stats))
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        report.write_stats_csv(stats, outdir / "stats.csv")
        figures = report.render_stats_figures(stats, outdir)
        log.info("wrote %s and %d figures to %s", "stats.csv", len(figures), outdir)
    return 0


def cmd_perturb(args: argparse.Namespace) -> int:
    try:
        attack = perturb.parse_attack(args.attack)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    loaded = _load_graphs(args.graphs)
    if not loaded:
        raise UsageError("no valid graph files found")
    outdir = Path(args.out or "perturbed")
    outdir.mkdir(parents=True, exist_ok=True)

    if isinstance(attack, perturb.LfaConfig):
        labels = {g.contract_id: g.label for _, g in loaded if g.label in (0, 1)}
        if len(labels) < len(loaded):
            raise UsageError("label flipping needs binary labels on every graph")
        flipped_labels, flipped = perturb.flip_labels(labels, attack.k_pct, args.seed)
        for path, g in loaded:
            g.label = flipped_labels[g.contract_id]
            _atomic_write(outdir / path.name, graphio.to_json(g))
        sidecar = {
            "attack": args.attack,
            "seed": args.seed,
            "flipped_ids": flipped,
        }
        _atomic_write(outdir / "provenance.json",
                      json.dumps(sidecar, indent=2, sort_keys=True).encode())
        print(f"{len(loaded)} graphs written, {len(flipped)} labels flipped")
        return 0

    for path, g in loaded:
        if isinstance(attack, perturb.GiaConfig):
            out, injected = perturb.inject_nodes(g, attack.k_pct, attack.m_edges, args.seed)
        else:
            out, injected = perturb.flip_edges(g, attack.k_pct, args.seed), []
        _atomic_write(outdir / path.name, graphio.to_json(out))
        sidecar = {
            "attack": args.attack,
            "seed": args.seed,
            "source": path.name,
            "injected_nodes": injected,
        }
        _atomic_write(outdir / f"{path.stem}.provenance.json",
                      json.dumps(sidecar, indent=2, sort_keys=True).encode())
    print(f"{len(loaded)} graphs written")
    return 0


def cmd_export_dot(args: argparse.Namespace) -> int:
    try:
        g = graphio.from_json(Path(args.graph).read_bytes())
    except (OSError, SchemaError) as exc:
        raise UsageError(f"cannot load graph: {exc}") from exc
    highlight: list[int] = []
    if args.highlight:
        try:
            expl = json.loads(Path(args.highlight).read_text())
            highlight = list(expl["factual_edges"])
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot load highlight file: {exc}") from exc
    injected: list[int] = []
    if args.injected:
        try:
            prov = json.loads(Path(args.injected).read_text())
            injected = list(prov.get("injected_nodes", []))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load provenance file: {exc}") from exc
    try:
        dot = graphio.to_dot(
            g,
            highlight_edges=highlight,
            injected_nodes=injected,
            reverse_edges=args.reverse_edges,
        )
    except SchemaError as exc:
        raise UsageError(str(exc)) from exc
    if args.output:
        _atomic_write(Path(args.output), dot.encode())
    else:
        sys.stdout.write(dot)
    return 0


def cmd_fetch(args: argparse.Namespace) -> int:
    endpoint = args.rpc_url or os.environ.get(RPC_URL_ENV)
    if not endpoint:
        raise UsageError(
            f"no RPC endpoint; pass --rpc-url or set {RPC_URL_ENV}"
        )
    targets: list[tuple[str, str]] = []
    if args.address:
        targets.append((args.address, args.address))
    if args.manifest:
        try:
            manifest = ingest.load_manifest(args.manifest)
        except SemrelError as exc:
            raise UsageError(f"cannot read manifest: {exc}") from exc
        targets.extend(
            (e.id, e.address) for e in manifest if e.address is not None
        )
    if not targets:
        raise UsageError("nothing to fetch; pass --address or --manifest")
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    ok = failed = 0
    for cid, address in targets:
        try:
            code = ingest.fetch_bytecode(endpoint, address)
        except SemrelError as exc:
            log.error("fetch %s failed: %s", cid, exc)
            failed += 1
            continue
        _atomic_write(outdir / f"{cid}.hex", b"0x" + code.hex().encode() + b"\n")
        ok += 1
    print(f"{ok} fetched, {failed} failed")
    return 0 if ok else 2


def _parse_strategy(text: str) -> graphio.Strategy:
    parts = text.split(":")
    try:
        if parts[0] == "kfold" and len(parts) == 2:
            return graphio.KFold(int(parts[1]))
        if parts[0] == "rand" and len(parts) == 2:
            return graphio.RandPct(float(parts[1]))
        if parts[0] == "old" and len(parts) == 2:
            return graphio.OldPct(float(parts[1]))
    except ValueError as exc:
        raise UsageError(f"bad strategy {text!r}: {exc}") from exc
    raise UsageError(f"bad strategy {text!r}; expected kfold:K, rand:P, or old:P")


def cmd_split(args: argparse.Namespace) -> int:
    try:
        manifest = ingest.load_manifest(args.manifest)
    except SemrelError as exc:
        raise UsageError(f"cannot read manifest: {exc}") from exc
    if not len(manifest):
        raise UsageError("manifest has no records")
    strategy = _parse_strategy(args.strategy)
    try:
        plan = graphio.make_splits(manifest, strategy, args.seed)
    except SemrelError as exc:
        raise UsageError(str(exc)) from exc
    out = args.out or "splits.json"
    graphio.save_split_plan(plan, out)
    counts: dict[str, int] = {}
    for v in plan.assignments.values():
        counts[str(v)] = counts.get(str(v), 0) + 1
    print(f"wrote {out}: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semrel",
        description="Build and analyze semantic relation graphs from EVM bytecode.",
    )
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build graphs from bytecode or a manifest")
    p.add_argument("bytecode", nargs="*", help="raw-hex bytecode files")
    p.add_argument("--manifest", help="line-delimited JSON manifest")
    p.add_argument("--out", help="output directory (default: cwd)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stats", help="aggregate corpus statistics")
    p.add_argument("graphs", nargs="+", help="graph JSON files or directories")
    p.add_argument("--out", help="write stats.csv and figures here")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("perturb", help="apply a robustness perturbation")
    p.add_argument("graphs", nargs="+", help="graph JSON files or directories")
    p.add_argument("--attack", required=True, help="gia:K:M | lfa:K | edgeflip:K")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default: perturbed/)")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("export-dot", help="render a graph to Graphviz DOT")
    p.add_argument("graph", help="graph JSON file")
    p.add_argument("--highlight", help="explanation JSON with factual_edges")
    p.add_argument("--injected", help="perturbation provenance JSON")
    p.add_argument("--reverse-edges", action="store_true",
                   help="emit dependency -> dependent edge direction")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("fetch", help="fetch deployed bytecode over JSON-RPC")
    p.add_argument("--address", help="single contract address")
    p.add_argument("--manifest", help="manifest with address-backed records")
    p.add_argument("--rpc-url", help=f"node endpoint (default: ${RPC_URL_ENV})")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("split", help="produce a dataset split plan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--strategy", required=True, help="kfold:K | rand:P | old:P")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: splits.json)")
    p.set_defaults(func=cmd_split)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SemrelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # invariant violation
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
