"""Graph dataset loading.

Consumes the upstream graph-JSON schema (vocab_version 1):

    {"contract_id": str, "label": 0|1|null,
     "nodes": [{"id": int, "pc": int, "op": str}],
     "edges": [{"src": int, "dst": int, "rel": "control"|"data"|"effect"}],
     "diagnostics": {...}, "vocab_version": int}

plus split-plan JSON files mapping contract ids to train/val/test (or fold
indices). Node features are one-hot over the published opcode vocabulary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import torch

RELATIONS = ("control", "data", "effect")

# Published opcode vocabulary for graph schema vocab_version 1: the retained
# semantic opcodes in byte order with CONST appended last.
OPCODE_VOCAB_V1 = (
    "STOP", "ADD", "MUL", "SUB", "DIV", "SDIV", "MOD", "SMOD", "ADDMOD",
    "MULMOD", "EXP", "SIGNEXTEND", "LT", "GT", "SLT", "SGT", "EQ", "ISZERO",
    "AND", "OR", "XOR", "NOT", "BYTE", "SHL", "SHR", "SAR", "KECCAK256",
    "ADDRESS", "BALANCE", "ORIGIN", "CALLER", "CALLVALUE", "CALLDATALOAD",
    "CALLDATASIZE", "CALLDATACOPY", "CODESIZE", "CODECOPY", "GASPRICE",
    "EXTCODESIZE", "EXTCODECOPY", "RETURNDATASIZE", "RETURNDATACOPY",
    "EXTCODEHASH", "BLOCKHASH", "COINBASE", "TIMESTAMP", "NUMBER",
    "PREVRANDAO", "GASLIMIT", "CHAINID", "SELFBALANCE", "BASEFEE", "MLOAD",
    "MSTORE", "MSTORE8", "SLOAD", "SSTORE", "JUMP", "JUMPI", "PC", "MSIZE",
    "GAS", "JUMPDEST", "LOG0", "LOG1", "LOG2", "LOG3", "LOG4", "CREATE",
    "CALL", "CALLCODE", "RETURN", "DELEGATECALL", "CREATE2", "STATICCALL",
    "REVERT", "INVALID", "SELFDESTRUCT", "CONST",
)

_VOCAB_INDEX = {op: i for i, op in enumerate(OPCODE_VOCAB_V1)}


class DatasetError(ValueError):
    """Malformed graph or split-plan input."""


@dataclass
class GraphData:
    """One graph, tensorized and ready for the detector."""

    contract_id: str
    x: torch.Tensor  # |V| x |vocab| one-hot
    edge_index: torch.Tensor  # 2 x |E| (src, dst rows)
    edge_type: torch.Tensor  # |E| in {0, 1, 2}
    label: Optional[int]

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_index.shape[1]

    def to(self, dtype: torch.dtype) -> "GraphData":
        return GraphData(
            self.contract_id, self.x.to(dtype), self.edge_index, self.edge_type, self.label
        )


def graph_from_obj(obj: dict) -> GraphData:
    try:
        nodes = obj["nodes"]
        edges = obj["edges"]
        contract_id = obj["contract_id"]
        label = obj["label"]
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"missing field in graph object: {exc}") from exc
    if label not in (0, 1, None):
        raise DatasetError(f"{contract_id}: bad label {label!r}")
    n = len(nodes)
    x = torch.zeros((n, len(OPCODE_VOCAB_V1)), dtype=torch.float32)
    for node in nodes:
        op = node["op"]
        if op not in _VOCAB_INDEX:
            raise DatasetError(f"{contract_id}: opcode {op!r} not in vocabulary")
        x[node["id"], _VOCAB_INDEX[op]] = 1.0
    m = len(edges)
    edge_index = torch.zeros((2, m), dtype=torch.long)
    edge_type = torch.zeros(m, dtype=torch.long)
    rel_rank = {rel: i for i, rel in enumerate(RELATIONS)}
    for i, e in enumerate(edges):
        src, dst = e["src"], e["dst"]
        if not (0 <= src < n and 0 <= dst < n):
            raise DatasetError(f"{contract_id}: edge {i} endpoint out of range")
        edge_index[0, i] = src
        edge_index[1, i] = dst
        try:
            edge_type[i] = rel_rank[e["rel"]]
        except KeyError as exc:
            raise DatasetError(f"{contract_id}: edge {i} bad relation {e['rel']!r}") from exc
    return GraphData(contract_id, x, edge_index, edge_type, label)


def load_graph(path: str | Path) -> GraphData:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON: {exc.msg}") from exc
    return graph_from_obj(obj)


def load_dataset(paths: Iterable[str | Path]) -> list[GraphData]:
    """Load graphs from files and/or directories, sorted by contract id."""
    graphs: list[GraphData] = []
    for raw in paths:
        p = Path(raw)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        for f in files:
            if f.name.endswith(".provenance.json") or f.name in (
                "provenance.json", "splits.json", "labels.json", "motifs.json",
            ):
                continue
            graphs.append(load_graph(f))
    graphs.sort(key=lambda g: g.contract_id)
    return graphs


def load_split_plan(path: str | Path) -> dict[str, object]:
    obj = json.loads(Path(path).read_text())
    try:
        return dict(obj["assignments"])
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"{path}: missing assignments") from exc


def partition(
    graphs: Sequence[GraphData], assignments: dict[str, object]
) -> dict[str, list[GraphData]]:
    """Group graphs into train/val/test per the split plan. Fold-indexed
    plans are not resolved here; use fold_partition."""
    out: dict[str, list[GraphData]] = {"train": [], "val": [], "test": []}
    for g in graphs:
        part = assignments.get(g.contract_id)
        if part in out:
            out[str(part)].append(g)
    return out


def fold_partition(
    graphs: Sequence[GraphData], assignments: dict[str, object], test_fold: int
) -> dict[str, list[GraphData]]:
    """K-fold plans: the chosen fold is the test set, the rest train."""
    out: dict[str, list[GraphData]] = {"train": [], "val": [], "test": []}
    for g in graphs:
        fold = assignments.get(g.contract_id)
        if fold is None:
            continue
        out["test" if int(fold) == test_fold else "train"].append(g)
    return out
