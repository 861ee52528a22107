"""Synthetic labeled corpus with planted structural motifs.

Positive graphs carry one long control-edge chain (deep execution path);
negative graphs get the same amount of control material broken into
two-node fragments, so class separation lives in structure, not opcode
counts. Both classes share a random data/effect background. The planted
chain's edge ids are recorded so explanation coverage can be measured.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

BACKGROUND_OPS = (
    "CONST", "ADD", "MLOAD", "MSTORE", "SLOAD", "SSTORE",
    "AND", "ISZERO", "CALLER", "KECCAK256",
)


@dataclass
class SynthGraph:
    contract_id: str
    label: int
    obj: dict  # graph-JSON object
    motif_edges: list[int]  # indices into obj["edges"]


def _background(rng: random.Random, n: int) -> tuple[list[str], list[tuple[int, int, str]]]:
    ops = [rng.choice(BACKGROUND_OPS) for _ in range(n)]
    edges: list[tuple[int, int, str]] = []
    for i in range(1, n):
        for _ in range(rng.randint(1, 2)):
            j = rng.randrange(max(1, i))
            if i != j:
                edges.append((i, j, rng.choice(("data", "effect"))))
    return ops, edges


def make_graph(rng: random.Random, contract_id: str, label: int) -> SynthGraph:
    n_background = rng.randint(10, 18)
    ops, edges = _background(rng, n_background)
    chain_len = rng.randint(20, 28) & ~1  # even, so fragments pair up evenly
    motif_edges: list[int] = []
    base = len(ops)
    for i in range(chain_len):
        ops.append("JUMPDEST" if i % 2 == 0 else "JUMP")
    if label == 1:
        # One long chain: consecutive control edges along the whole run.
        for i in range(chain_len - 1):
            motif_edges.append(len(edges))
            edges.append((base + i + 1, base + i, "control"))
    else:
        # Same material in disconnected two-node fragments.
        for i in range(0, chain_len - 1, 2):
            edges.append((base + i + 1, base + i, "control"))
    nodes = [{"id": i, "pc": i * 2, "op": op} for i, op in enumerate(ops)]
    obj = {
        "contract_id": contract_id,
        "label": label,
        "nodes": nodes,
        "edges": [{"src": s, "dst": d, "rel": r} for s, d, r in edges],
        "diagnostics": {"unresolved_jumps": 0, "stack_underflows": 0},
        "vocab_version": 1,
    }
    return SynthGraph(contract_id, label, obj, motif_edges)


def make_corpus(n_graphs: int = 200, seed: int = 0) -> list[SynthGraph]:
    rng = random.Random(seed)
    return [
        make_graph(rng, f"syn{i:04d}", i % 2)
        for i in range(n_graphs)
    ]


def write_corpus(
    corpus: list[SynthGraph],
    outdir: str | Path,
    seed: int = 0,
    train_frac: float = 0.6,
    val_frac: float = 0.2,
) -> Path:
    """Write graph files, the motif sidecar, and a split plan; returns the
    output directory."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for g in corpus:
        (outdir / f"{g.contract_id}.json").write_text(
            json.dumps(g.obj, sort_keys=True, separators=(",", ":"))
        )
    motifs = {g.contract_id: g.motif_edges for g in corpus}
    (outdir / "motifs.json").write_text(json.dumps(motifs, sort_keys=True, indent=2))

    rng = random.Random(seed)
    ids = sorted(g.contract_id for g in corpus)
    rng.shuffle(ids)
    n_train = int(len(ids) * train_frac)
    n_val = int(len(ids) * val_frac)
    assignments = {}
    for i, cid in enumerate(ids):
        assignments[cid] = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
    plan = {
        "strategy": {"kind": "rand_pct", "pct": train_frac * 100},
        "seed": seed,
        "assignments": assignments,
    }
    (outdir / "splits.json").write_text(json.dumps(plan, sort_keys=True, indent=2))
    return outdir
