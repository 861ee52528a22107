"""Corpus statistics reporting: per-class aggregation, a delimited table,
and matplotlib figures rendered to files.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import EmptyGraphError
from .srg import RELATIONS, SRG, graph_stats

__all__ = ["ClassStats", "aggregate_stats", "format_stats_table",
           "write_stats_csv", "render_stats_figures"]

_CLASS_NAMES = {0: "benign", 1: "aec", None: "unlabeled"}


@dataclass
class ClassStats:
    name: str
    graph_count: int
    node_count: int
    edge_count: int
    opcode_ratios: dict[str, float]  # pooled over the class corpus
    relation_ratios: dict[str, float]
    avg_path_length: float  # mean of per-graph averages

    def top_opcodes(self, k: int = 5) -> list[tuple[str, float]]:
        ranked = sorted(self.opcode_ratios.items(), key=lambda it: (-it[1], it[0]))
        return ranked[:k]


def aggregate_stats(graphs: Sequence[SRG]) -> dict[str, ClassStats]:
    """Pool opcode and relation counts per label class; path lengths are
    averaged per graph."""
    if not graphs:
        raise EmptyGraphError("no graphs to aggregate")
    by_class: dict[Optional[int], list[SRG]] = {}
    for g in graphs:
        by_class.setdefault(g.label, []).append(g)
    out: dict[str, ClassStats] = {}
    for label in sorted(by_class, key=lambda v: (v is None, v)):
        members = by_class[label]
        ops: Counter[str] = Counter()
        rels: Counter[str] = Counter()
        path_lengths: list[float] = []
        nodes = edges = 0
        for g in members:
            if not g.nodes:
                continue
            st = graph_stats(g)
            ops.update(n.op for n in g.nodes)
            rels.update(e.rel for e in g.edges)
            path_lengths.append(st.avg_path_length)
            nodes += st.node_count
            edges += st.edge_count
        total_ops = sum(ops.values()) or 1
        total_rels = sum(rels.values()) or 1
        name = _CLASS_NAMES.get(label, str(label))
        out[name] = ClassStats(
            name=name,
            graph_count=len(members),
            node_count=nodes,
            edge_count=edges,
            opcode_ratios={op: c / total_ops for op, c in sorted(ops.items())},
            relation_ratios={rel: rels.get(rel, 0) / total_rels for rel in RELATIONS},
            avg_path_length=(sum(path_lengths) / len(path_lengths)) if path_lengths else 0.0,
        )
    return out


def format_stats_table(stats: dict[str, ClassStats], top_k: int = 5) -> str:
    lines = []
    header = f"{'feature':<28}" + "".join(f"{name:>14}" for name in stats)
    lines.append(header)
    lines.append("-" * len(header))
    lines.append(f"{'graphs':<28}" + "".join(f"{s.graph_count:>14}" for s in stats.values()))
    lines.append(f"{'nodes':<28}" + "".join(f"{s.node_count:>14}" for s in stats.values()))
    lines.append(f"{'edges':<28}" + "".join(f"{s.edge_count:>14}" for s in stats.values()))
    for rank in range(top_k):
        cells = []
        for s in stats.values():
            top = s.top_opcodes(top_k)
            cells.append(f"{top[rank][0]} {top[rank][1]:.2f}" if rank < len(top) else "-")
        lines.append(f"{f'top opcode #{rank + 1}':<28}" + "".join(f"{c:>14}" for c in cells))
    for rel in RELATIONS:
        lines.append(
            f"{rel + ' relation ratio':<28}"
            + "".join(f"{s.relation_ratios[rel]:>14.2f}" for s in stats.values())
        )
    lines.append(
        f"{'avg path length':<28}"
        + "".join(f"{s.avg_path_length:>14.2f}" for s in stats.values())
    )
    return "\n".join(lines)


def write_stats_csv(stats: dict[str, ClassStats], path: str | Path) -> None:
    """Long-format delimited output: class,metric,key,value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "metric", "key", "value"])
        for s in stats.values():
            writer.writerow([s.name, "graph_count", "", s.graph_count])
            writer.writerow([s.name, "node_count", "", s.node_count])
            writer.writerow([s.name, "edge_count", "", s.edge_count])
            writer.writerow([s.name, "avg_path_length", "", f"{s.avg_path_length:.6f}"])
            for rel in RELATIONS:
                writer.writerow([s.name, "relation_ratio", rel, f"{s.relation_ratios[rel]:.6f}"])
            for op, ratio in s.opcode_ratios.items():
                writer.writerow([s.name, "opcode_ratio", op, f"{ratio:.6f}"])


def render_stats_figures(stats: dict[str, ClassStats], outdir: str | Path) -> list[Path]:
    """Render opcode-frequency, relation-mix, and path-length figures."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []

    fig, axes = plt.subplots(1, len(stats), figsize=(5 * len(stats), 3.2), squeeze=False)
    for ax, s in zip(axes[0], stats.values()):
        top = s.top_opcodes(8)
        ax.bar([op for op, _ in top], [r for _, r in top], color="steelblue")
        ax.set_title(f"{s.name}: top opcodes")
        ax.set_ylabel("frequency ratio")
        ax.tick_params(axis="x", rotation=60)
    fig.tight_layout()
    p = outdir / "opcode_frequency.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    width = 0.8 / max(len(stats), 1)
    for i, s in enumerate(stats.values()):
        xs = [j + i * width for j in range(len(RELATIONS))]
        ax.bar(xs, [s.relation_ratios[rel] for rel in RELATIONS], width, label=s.name)
    ax.set_xticks([j + width * (len(stats) - 1) / 2 for j in range(len(RELATIONS))])
    ax.set_xticklabels(RELATIONS)
    ax.set_ylabel("edge ratio")
    ax.set_title("relation mix")
    ax.legend()
    fig.tight_layout()
    p = outdir / "relation_ratios.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(4, 3.2))
    names = list(stats)
    ax.bar(names, [stats[n].avg_path_length for n in names], color="indianred")
    ax.set_ylabel("avg shortest-path length")
    ax.set_title("structural depth")
    fig.tight_layout()
    p = outdir / "path_length.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths
