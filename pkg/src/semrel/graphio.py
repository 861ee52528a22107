"""Graph serialization, learning-ready encoding, dataset splits, and DOT
export.

The JSON schema here is the contract boundary with downstream learners:

    {"contract_id": str, "label": 0|1|null,
     "nodes": [{"id": int, "pc": int, "op": str}],
     "edges": [{"src": int, "dst": int, "rel": "control"|"data"|"effect"}],
     "diagnostics": {"unresolved_jumps": int, "stack_underflows": int},
     "vocab_version": int}
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .disasm import OPCODE_TABLE, STACK_NOISE_OPS
from .errors import MissingTimestampError, SchemaError, UnknownOpcodeError
from .ingest import DatasetManifest
from .srg import RELATIONS, SRG, Diagnostics, SemanticNode, TypedEdge

__all__ = [
    "VOCAB_VERSION",
    "OPCODE_VOCAB",
    "EncodedGraph",
    "KFold",
    "RandPct",
    "OldPct",
    "SplitPlan",
    "to_json",
    "from_json",
    "encode",
    "make_splits",
    "save_split_plan",
    "load_split_plan",
    "to_dot",
    "round_half_up",
]

VOCAB_VERSION = 1


def _build_vocab() -> tuple[str, ...]:
    seen: list[str] = []
    for byte in sorted(OPCODE_TABLE):
        m = OPCODE_TABLE[byte].mnemonic
        if m not in STACK_NOISE_OPS:
            seen.append(m)
    return tuple(seen) + ("CONST",)


# All retained semantic opcodes in byte order, CONST appended last.
OPCODE_VOCAB: tuple[str, ...] = _build_vocab()


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


# ---------------------------------------------------------------------------
# JSON round trip


def to_json(g: SRG) -> bytes:
    """Canonical JSON bytes; byte-identical for equal graphs."""
    obj = {
        "contract_id": g.contract_id,
        "label": g.label,
        "nodes": [{"id": n.id, "pc": n.pc, "op": n.op} for n in g.nodes],
        "edges": [{"src": e.src, "dst": e.dst, "rel": e.rel} for e in g.edges],
        "diagnostics": {
            "unresolved_jumps": g.diagnostics.unresolved_jumps,
            "stack_underflows": g.diagnostics.stack_underflows,
        },
        "vocab_version": VOCAB_VERSION,
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _expect(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise SchemaError(path, message)


def from_json(data: Union[bytes, str]) -> SRG:
    """Parse and validate the graph schema; lossless inverse of to_json."""
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc.msg}") from exc
    _expect(isinstance(obj, dict), "$", "expected an object")
    for key in ("contract_id", "label", "nodes", "edges", "diagnostics", "vocab_version"):
        _expect(key in obj, key, "missing required field")
    _expect(isinstance(obj["contract_id"], str), "contract_id", "expected string")
    _expect(obj["label"] in (0, 1, None), "label", f"bad label {obj['label']!r}")
    _expect(isinstance(obj["nodes"], list), "nodes", "expected array")
    _expect(isinstance(obj["edges"], list), "edges", "expected array")

    nodes: list[SemanticNode] = []
    pcs: set[int] = set()
    for i, raw in enumerate(obj["nodes"]):
        path = f"nodes[{i}]"
        _expect(isinstance(raw, dict), path, "expected object")
        for key in ("id", "pc", "op"):
            _expect(key in raw, f"{path}.{key}", "missing field")
        _expect(raw["id"] == i, f"{path}.id", f"ids must be dense, got {raw['id']}")
        _expect(
            isinstance(raw["pc"], int) and raw["pc"] >= 0,
            f"{path}.pc",
            "expected non-negative integer",
        )
        _expect(raw["pc"] not in pcs, f"{path}.pc", f"duplicate pc {raw['pc']}")
        pcs.add(raw["pc"])
        _expect(isinstance(raw["op"], str) and raw["op"], f"{path}.op", "expected opcode")
        nodes.append(SemanticNode(i, raw["pc"], raw["op"]))

    n = len(nodes)
    edges: list[TypedEdge] = []
    for i, raw in enumerate(obj["edges"]):
        path = f"edges[{i}]"
        _expect(isinstance(raw, dict), path, "expected object")
        for key in ("src", "dst", "rel"):
            _expect(key in raw, f"{path}.{key}", "missing field")
        for key in ("src", "dst"):
            v = raw[key]
            _expect(isinstance(v, int) and 0 <= v < n, f"{path}.{key}",
                    f"endpoint {v!r} out of range for {n} nodes")
        _expect(raw["rel"] in RELATIONS, f"{path}.rel", f"bad relation {raw['rel']!r}")
        edges.append(TypedEdge(raw["src"], raw["dst"], raw["rel"]))

    diag = obj["diagnostics"]
    _expect(isinstance(diag, dict), "diagnostics", "expected object")
    for key in ("unresolved_jumps", "stack_underflows"):
        _expect(
            isinstance(diag.get(key), int) and diag[key] >= 0,
            f"diagnostics.{key}",
            "expected non-negative integer",
        )
    _expect(
        isinstance(obj["vocab_version"], int),
        "vocab_version",
        "expected integer",
    )
    return SRG(
        contract_id=obj["contract_id"],
        nodes=nodes,
        edges=edges,
        label=obj["label"],
        diagnostics=Diagnostics(diag["unresolved_jumps"], diag["stack_underflows"]),
    )


# ---------------------------------------------------------------------------
# Learning-ready encoding


@dataclass
class EncodedGraph:
    node_features: np.ndarray  # |V| x |vocab| one-hot
    edge_index: np.ndarray  # 2 x |E|
    edge_type: np.ndarray  # |E| in {0: control, 1: data, 2: effect}
    incidence: sp.csr_matrix  # |E| x |V|, 0.5 at each endpoint
    label: Optional[int]


def encode(g: SRG, vocab: Sequence[str] = OPCODE_VOCAB) -> EncodedGraph:
    index = {op: i for i, op in enumerate(vocab)}
    n, m = len(g.nodes), len(g.edges)
    features = np.zeros((n, len(vocab)), dtype=np.float32)
    for node in g.nodes:
        if node.op not in index:
            raise UnknownOpcodeError(node.op)
        features[node.id, index[node.op]] = 1.0
    edge_index = np.zeros((2, m), dtype=np.int64)
    edge_type = np.zeros(m, dtype=np.int64)
    rel_rank = {rel: i for i, rel in enumerate(RELATIONS)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for i, e in enumerate(g.edges):
        edge_index[0, i] = e.src
        edge_index[1, i] = e.dst
        edge_type[i] = rel_rank[e.rel]
        if e.src == e.dst:
            rows.append(i)
            cols.append(e.src)
            vals.append(1.0)
        else:
            rows.extend((i, i))
            cols.extend((e.src, e.dst))
            vals.extend((0.5, 0.5))
    incidence = sp.csr_matrix(
        (np.asarray(vals, dtype=np.float32), (rows, cols)), shape=(m, n)
    )
    return EncodedGraph(features, edge_index, edge_type, incidence, g.label)


# ---------------------------------------------------------------------------
# Dataset splits


@dataclass(frozen=True)
class KFold:
    k: int


@dataclass(frozen=True)
class RandPct:
    pct: float


@dataclass(frozen=True)
class OldPct:
    pct: float


Strategy = Union[KFold, RandPct, OldPct]


@dataclass
class SplitPlan:
    strategy: Strategy
    seed: int
    assignments: dict[str, Union[int, str]]


def _train_val_test(ordered: list[str], pct: float) -> dict[str, str]:
    n_train = round_half_up(len(ordered) * pct / 100.0)
    rest = ordered[n_train:]
    n_val = len(rest) // 2
    out: dict[str, str] = {}
    for cid in ordered[:n_train]:
        out[cid] = "train"
    for cid in rest[:n_val]:
        out[cid] = "val"
    for cid in rest[n_val:]:
        out[cid] = "test"
    return out


def make_splits(manifest: DatasetManifest, strategy: Strategy, seed: int) -> SplitPlan:
    """Seeded, reproducible assignment of contracts to folds or splits."""
    ids = [e.id for e in manifest]
    rng = random.Random(seed)
    if isinstance(strategy, KFold):
        shuffled = sorted(ids)
        rng.shuffle(shuffled)
        assignments: dict[str, Union[int, str]] = {
            cid: i % strategy.k for i, cid in enumerate(shuffled)
        }
    elif isinstance(strategy, RandPct):
        shuffled = sorted(ids)
        rng.shuffle(shuffled)
        assignments = dict(_train_val_test(shuffled, strategy.pct))
    else:
        stamped = []
        for e in manifest:
            if e.deployed_at is None:
                raise MissingTimestampError(
                    f"record {e.id} lacks deployed_at, required for age-ordered splits"
                )
            stamped.append((e.deployed_at, e.id))
        ordered = [cid for _, cid in sorted(stamped)]
        assignments = dict(_train_val_test(ordered, strategy.pct))
    return SplitPlan(strategy=strategy, seed=seed, assignments=assignments)


def save_split_plan(plan: SplitPlan, path) -> None:
    if isinstance(plan.strategy, KFold):
        strat = {"kind": "kfold", "k": plan.strategy.k}
    elif isinstance(plan.strategy, RandPct):
        strat = {"kind": "rand_pct", "pct": plan.strategy.pct}
    else:
        strat = {"kind": "old_pct", "pct": plan.strategy.pct}
    obj = {"strategy": strat, "seed": plan.seed, "assignments": plan.assignments}
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_split_plan(path) -> SplitPlan:
    with open(path) as fh:
        obj = json.load(fh)
    strat = obj["strategy"]
    strategy: Strategy
    if strat["kind"] == "kfold":
        strategy = KFold(int(strat["k"]))
    elif strat["kind"] == "rand_pct":
        strategy = RandPct(float(strat["pct"]))
    elif strat["kind"] == "old_pct":
        strategy = OldPct(float(strat["pct"]))
    else:
        raise SchemaError("strategy.kind", f"unknown strategy {strat['kind']!r}")
    return SplitPlan(strategy, int(obj["seed"]), dict(obj["assignments"]))


# ---------------------------------------------------------------------------
# DOT export

_EDGE_COLORS = {"control": "blue", "data": "gray30", "effect": "purple"}
_HIGHLIGHT_COLOR = "orange"


def to_dot(
    g: SRG,
    highlight_edges: Optional[Iterable[int]] = None,
    injected_nodes: Optional[Iterable[int]] = None,
    graph_name: str = "srg",
    reverse_edges: bool = False,
) -> str:
    """Render to Graphviz DOT.

    ``highlight_edges`` are edge indices (into g.edges) drawn in orange with
    their endpoints filled orange. Injected nodes are filled red when they
    land in the highlight, green otherwise. Stored edges point dependent ->
    dependency; ``reverse_edges`` emits them the other way around for tools
    that expect dependency -> dependent.
    """
    m = len(g.edges)
    highlight = set(highlight_edges or ())
    for idx in highlight:
        if not isinstance(idx, int) or not 0 <= idx < m:
            raise SchemaError(
                "highlight", f"edge id {idx!r} out of range for {m} edges"
            )
    injected = set(injected_nodes or ())
    hot_nodes = {g.edges[i].src for i in highlight} | {g.edges[i].dst for i in highlight}

    lines = [f"digraph {graph_name} {{", '  node [shape=box, fontsize=10];']
    for node in g.nodes:
        attrs = [f'label="{node.pc:#x}:{node.op}"']
        if node.id in injected:
            fill = "red" if node.id in hot_nodes else "green"
            attrs.append(f"style=filled, fillcolor={fill}")
        elif node.id in hot_nodes:
            attrs.append(f"style=filled, fillcolor={_HIGHLIGHT_COLOR}")
        lines.append(f"  n{node.id} [{', '.join(attrs)}];")
    for i, e in enumerate(g.edges):
        if i in highlight:
            attrs = f'color={_HIGHLIGHT_COLOR}, penwidth=2.0, label="{e.rel[0]}"'
        else:
            attrs = f'color={_EDGE_COLORS[e.rel]}, label="{e.rel[0]}"'
        src, dst = (e.dst, e.src) if reverse_edges else (e.src, e.dst)
        lines.append(f"  n{src} -> n{dst} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
