"""Semantic relation graph construction.

Nodes are the retained semantic statements (stack plumbing is already gone
after lifting; literal pushes surface as CONST nodes). Edges come in three
relations, all pointing dependent -> dependency:

  control  destination block's entry node -> jumping block's branch node
  data     register use -> register definition
  effect   later memory/storage access -> earlier access on the same slot
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx

from .errors import EmptyGraphError
from .ingest import ContractRecord
from .disasm import disassemble
from .lifter import (
    BasicBlock,
    LiftedProgram,
    Reg,
    RtlStatement,
    block_successors,
    lift_program,
    resolve_value,
)

__all__ = [
    "RELATIONS",
    "SemanticNode",
    "TypedEdge",
    "Diagnostics",
    "SRG",
    "GraphStats",
    "build_cfg",
    "build_control_edges",
    "build_data_edges",
    "build_effect_edges",
    "simplify_nodes",
    "build_srg",
    "build_srg_from_bytes",
    "graph_stats",
]

RELATIONS = ("control", "data", "effect")
_REL_RANK = {rel: i for i, rel in enumerate(RELATIONS)}


@dataclass(frozen=True)
class SemanticNode:
    id: int
    pc: int
    op: str


@dataclass(frozen=True)
class TypedEdge:
    src: int
    dst: int
    rel: str


@dataclass
class Diagnostics:
    unresolved_jumps: int = 0
    stack_underflows: int = 0


@dataclass
class SRG:
    contract_id: str
    nodes: list[SemanticNode] = field(default_factory=list)
    edges: list[TypedEdge] = field(default_factory=list)
    label: Optional[int] = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def edges_by_relation(self) -> dict[str, list[TypedEdge]]:
        out: dict[str, list[TypedEdge]] = {rel: [] for rel in RELATIONS}
        for e in self.edges:
            out[e.rel].append(e)
        return out


def sort_edges(edges) -> list[TypedEdge]:
    return sorted(set(edges), key=lambda e: (_REL_RANK[e.rel], e.src, e.dst))


def simplify_nodes(
    statements: Sequence[RtlStatement],
) -> tuple[list[SemanticNode], dict[int, int]]:
    """One node per retained statement, ordered by pc; returns pc -> id."""
    ordered = sorted(statements, key=lambda s: s.pc)
    nodes = [SemanticNode(i, s.pc, s.op) for i, s in enumerate(ordered)]
    return nodes, {n.pc: n.id for n in nodes}


def build_cfg(
    blocks: Sequence[BasicBlock],
    jump_targets: dict[int, tuple[int, ...]],
) -> list[tuple[int, int]]:
    """Block-level control-flow edges (jumping block -> destination block)."""
    return block_successors(blocks, jump_targets)


def build_control_edges(
    blocks: Sequence[BasicBlock],
    cfg_edges: Sequence[tuple[int, int]],
    pc_to_node: dict[int, int],
) -> set[TypedEdge]:
    """Control edges run from the destination block's entry node to the
    jumping block's branch node (last semantic node for fallthroughs)."""
    by_entry = {b.entry_pc: b for b in blocks}
    edges: set[TypedEdge] = set()
    for src_block_pc, dst_block_pc in cfg_edges:
        src_block = by_entry[src_block_pc]
        dst_block = by_entry[dst_block_pc]
        if not src_block.statements or not dst_block.statements:
            continue
        entry_node = pc_to_node[dst_block.statements[0].pc]
        branch_node = pc_to_node[src_block.statements[-1].pc]
        edges.add(TypedEdge(entry_node, branch_node, "control"))
    return edges


def build_data_edges(
    statements: Sequence[RtlStatement],
    pc_to_node: dict[int, int],
) -> set[TypedEdge]:
    """Def-use edges: each register use points back at its definition."""
    def_pc: dict[int, int] = {}
    for s in statements:
        if s.def_reg is not None:
            def_pc[s.def_reg] = s.pc
    edges: set[TypedEdge] = set()
    for s in statements:
        for arg in s.args:
            if isinstance(arg, Reg) and arg.id in def_pc:
                edges.add(TypedEdge(pc_to_node[s.pc], pc_to_node[def_pc[arg.id]], "data"))
    return edges


# Memory/storage access classification. Addresses that fold to constants key
# exact slots; anything else shares one unknown bucket per address space.
_MEM_BUCKET = ("mem", None)
_STO_BUCKET = ("sto", None)

# Ops whose memory writes are modeled only for constant destinations.
_CONST_ONLY_MEM_WRITERS = {
    "CALLDATACOPY": -1,  # index into args (bottom-to-top) of the dest offset
    "CODECOPY": -1,
    "CALL": 1,
    "CALLCODE": 1,
    "DELEGATECALL": 1,
    "STATICCALL": 1,
}


def classify_access(
    stmt: RtlStatement, env: dict[int, int]
) -> Optional[tuple[str, str, Optional[int]]]:
    """Classify a statement as ('r'|'w', space, slot) or None.

    ``slot`` is the constant address, or None for the unknown bucket.
    """
    op = stmt.op
    if op == "MLOAD":
        return ("r", "mem", resolve_value(stmt.args[0], env))
    if op == "SLOAD":
        return ("r", "sto", resolve_value(stmt.args[0], env))
    if op in ("MSTORE", "MSTORE8"):
        return ("w", "mem", resolve_value(stmt.args[-1], env))
    if op == "SSTORE":
        return ("w", "sto", resolve_value(stmt.args[-1], env))
    if op in _CONST_ONLY_MEM_WRITERS:
        addr = resolve_value(stmt.args[_CONST_ONLY_MEM_WRITERS[op]], env)
        if addr is not None:
            return ("w", "mem", addr)
    return None


def build_effect_edges(
    statements: Sequence[RtlStatement],
    env: dict[int, int],
    pc_to_node: dict[int, int],
) -> set[TypedEdge]:
    """Same-slot ordering edges (read-after-write, write-after-write,
    write-after-read), from a single pc-order scan."""
    last_writer: dict[tuple[str, Optional[int]], int] = {}
    readers: dict[tuple[str, Optional[int]], list[int]] = defaultdict(list)
    edges: set[TypedEdge] = set()
    for s in sorted(statements, key=lambda st: st.pc):
        access = classify_access(s, env)
        if access is None:
            continue
        kind, space, slot = access
        key = (space, slot)
        node = pc_to_node[s.pc]
        if kind == "r":
            if key in last_writer:
                edges.add(TypedEdge(node, last_writer[key], "effect"))
            readers[key].append(node)
        else:
            if key in last_writer:
                edges.add(TypedEdge(node, last_writer[key], "effect"))
            for r in readers[key]:
                edges.add(TypedEdge(node, r, "effect"))
            last_writer[key] = node
            readers[key] = []
    return edges


def build_srg_from_lifted(
    contract_id: str,
    lifted: LiftedProgram,
    label: Optional[int] = None,
) -> SRG:
    statements = lifted.statements
    nodes, pc_to_node = simplify_nodes(statements)
    cfg = build_cfg(lifted.blocks, lifted.jump_targets)
    edges = (
        build_control_edges(lifted.blocks, cfg, pc_to_node)
        | build_data_edges(statements, pc_to_node)
        | build_effect_edges(statements, lifted.env, pc_to_node)
    )
    return SRG(
        contract_id=contract_id,
        nodes=nodes,
        edges=sort_edges(edges),
        label=label,
        diagnostics=Diagnostics(
            unresolved_jumps=lifted.unresolved_jumps,
            stack_underflows=lifted.stack_underflows,
        ),
    )


def build_srg_from_bytes(
    contract_id: str, code: bytes, label: Optional[int] = None
) -> SRG:
    return build_srg_from_lifted(contract_id, lift_program(disassemble(code)), label)


def build_srg(contract: ContractRecord) -> SRG:
    """Full pipeline: disassemble, lift, resolve jumps, build typed edges."""
    return build_srg_from_bytes(contract.id, contract.bytecode, contract.label)


@dataclass
class GraphStats:
    node_count: int
    edge_count: int
    opcode_ratios: dict[str, float]
    relation_ratios: dict[str, float]
    avg_path_length: float


def graph_stats(g: SRG) -> GraphStats:
    """Opcode frequency ratios, relation mix, and the mean undirected
    shortest-path length over the largest weakly-connected component."""
    if not g.nodes:
        raise EmptyGraphError(f"graph {g.contract_id} has no nodes")
    op_counts = Counter(n.op for n in g.nodes)
    n = len(g.nodes)
    opcode_ratios = {op: c / n for op, c in sorted(op_counts.items())}
    rel_counts = Counter(e.rel for e in g.edges)
    total_edges = len(g.edges)
    relation_ratios = {
        rel: (rel_counts.get(rel, 0) / total_edges if total_edges else 0.0)
        for rel in RELATIONS
    }
    ug = nx.Graph()
    ug.add_nodes_from(node.id for node in g.nodes)
    ug.add_edges_from((e.src, e.dst) for e in g.edges if e.src != e.dst)
    component = max(nx.connected_components(ug), key=lambda c: (len(c), -min(c)))
    if len(component) < 2:
        apl = 0.0
    else:
        apl = nx.average_shortest_path_length(ug.subgraph(component))
    return GraphStats(
        node_count=n,
        edge_count=total_edges,
        opcode_ratios=opcode_ratios,
        relation_ratios=relation_ratios,
        avg_path_length=apl,
    )
