"""Robustness-experiment harness: node injection, label flipping, and
random edge flips. All operations are pure and deterministic given a seed;
originals are never mutated.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Union

from .graphio import round_half_up
from .srg import RELATIONS, SRG, SemanticNode, TypedEdge

__all__ = [
    "GiaConfig",
    "LfaConfig",
    "EdgeFlipConfig",
    "AttackConfig",
    "parse_attack",
    "inject_nodes",
    "flip_labels",
    "flip_edges",
]


@dataclass(frozen=True)
class GiaConfig:
    k_pct: float
    m_edges: int

    def __post_init__(self):
        if not 0 < self.k_pct <= 100:
            raise ValueError(f"k_pct must be in (0, 100], got {self.k_pct}")
        if self.m_edges < 1:
            raise ValueError(f"m_edges must be >= 1, got {self.m_edges}")


@dataclass(frozen=True)
class LfaConfig:
    k_pct: float

    def __post_init__(self):
        if not 0 < self.k_pct <= 100:
            raise ValueError(f"k_pct must be in (0, 100], got {self.k_pct}")


@dataclass(frozen=True)
class EdgeFlipConfig:
    k_pct: float

    def __post_init__(self):
        if not 0 < self.k_pct <= 100:
            raise ValueError(f"k_pct must be in (0, 100], got {self.k_pct}")


AttackConfig = Union[GiaConfig, LfaConfig, EdgeFlipConfig]


def parse_attack(spec: str) -> AttackConfig:
    """Parse ``gia:K:M`` | ``lfa:K`` | ``edgeflip:K``."""
    parts = spec.split(":")
    try:
        if parts[0] == "gia" and len(parts) == 3:
            return GiaConfig(float(parts[1]), int(parts[2]))
        if parts[0] == "lfa" and len(parts) == 2:
            return LfaConfig(float(parts[1]))
        if parts[0] == "edgeflip" and len(parts) == 2:
            return EdgeFlipConfig(float(parts[1]))
    except ValueError as exc:
        raise ValueError(f"bad attack spec {spec!r}: {exc}") from exc
    raise ValueError(f"bad attack spec {spec!r}; expected gia:K:M, lfa:K, or edgeflip:K")


def inject_nodes(
    g: SRG, k_pct: float, m_edges: int, seed: int
) -> tuple[SRG, list[int]]:
    """Insert round(|V|*k/100) nodes, each wired to m distinct existing
    nodes (edges point new -> existing, relation drawn uniformly).

    Opcodes for the new nodes are sampled from the host graph's own opcode
    multiset. Returns the perturbed graph and the injected node ids.
    """
    if not g.nodes:
        raise ValueError("cannot inject into an empty graph")
    if m_edges > len(g.nodes):
        raise ValueError(
            f"m_edges={m_edges} exceeds node count {len(g.nodes)}"
        )
    rng = random.Random(seed)
    n_new = round_half_up(len(g.nodes) * k_pct / 100.0)
    host_ops = [n.op for n in g.nodes]
    next_pc = max(n.pc for n in g.nodes) + 1
    nodes = list(g.nodes)
    edges = list(g.edges)
    injected: list[int] = []
    orig_n = len(g.nodes)
    for i in range(n_new):
        nid = orig_n + i
        nodes.append(SemanticNode(nid, next_pc + i, rng.choice(host_ops)))
        injected.append(nid)
        for target in rng.sample(range(orig_n), m_edges):
            edges.append(TypedEdge(nid, target, rng.choice(RELATIONS)))
    out = SRG(
        contract_id=g.contract_id,
        nodes=nodes,
        edges=edges,
        label=g.label,
        diagnostics=g.diagnostics,
    )
    return out, injected


def flip_labels(
    labels: dict[str, int], k_pct: float, seed: int
) -> tuple[dict[str, int], list[str]]:
    """Flip exactly round(n*k/100) labels, chosen uniformly.

    Returns the new label map and the flipped ids.
    """
    rng = random.Random(seed)
    ids = sorted(labels)
    n_flip = round_half_up(len(ids) * k_pct / 100.0)
    flipped = sorted(rng.sample(ids, n_flip))
    out = dict(labels)
    for cid in flipped:
        out[cid] = 1 - out[cid]
    return out, flipped


def flip_edges(g: SRG, k_pct: float, seed: int) -> SRG:
    """Remove or insert a total of round(|E|*k/100) edges (uniform mix).

    Insertions pick distinct endpoints and a uniform relation. Removals
    target original edges only and insertions never resurrect a removed
    edge, so every modification is observable in the result. Nodes are
    never touched.
    """
    if not g.edges:
        raise ValueError("cannot flip edges of a graph with no edges")
    rng = random.Random(seed)
    n_mod = round_half_up(len(g.edges) * k_pct / 100.0)
    originals = list(g.edges)
    inserted: list[TypedEdge] = []
    removed: set[TypedEdge] = set()
    forbidden = set(originals)
    n = len(g.nodes)
    for _ in range(n_mod):
        removable = len(originals) > len(removed)
        if rng.random() < 0.5 and removable:
            while True:
                victim = originals[rng.randrange(len(originals))]
                if victim not in removed:
                    removed.add(victim)
                    break
        else:
            for _attempt in range(100):
                src, dst = rng.sample(range(n), 2)
                cand = TypedEdge(src, dst, rng.choice(RELATIONS))
                if cand not in forbidden:
                    inserted.append(cand)
                    forbidden.add(cand)
                    break
    edges = [e for e in originals if e not in removed] + inserted
    return SRG(
        contract_id=g.contract_id,
        nodes=list(g.nodes),
        edges=edges,
        label=g.label,
        diagnostics=g.diagnostics,
    )
