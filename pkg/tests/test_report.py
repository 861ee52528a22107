import csv

import pytest

from semrel.errors import EmptyGraphError
from semrel.report import aggregate_stats, format_stats_table, render_stats_figures, write_stats_csv
from semrel.srg import SRG, Diagnostics, SemanticNode, TypedEdge


def graph(label, ops, edge_spec, cid="g"):
    nodes = [SemanticNode(i, i, op) for i, op in enumerate(ops)]
    edges = [TypedEdge(s, d, r) for s, d, r in edge_spec]
    return SRG(cid, nodes, edges, label, Diagnostics())


@pytest.fixture()
def corpus():
    return [
        graph(0, ["CONST", "ADD", "MSTORE"], [(1, 0, "data"), (2, 1, "effect")], "b1"),
        graph(0, ["CONST", "MLOAD"], [(1, 0, "data")], "b2"),
        graph(1, ["JUMPDEST", "CONST", "JUMP"], [(0, 2, "control"), (2, 1, "data")], "a1"),
    ]


def test_aggregate_pools_by_class(corpus):
    stats = aggregate_stats(corpus)
    assert set(stats) == {"benign", "aec"}
    benign = stats["benign"]
    assert benign.graph_count == 2
    assert benign.node_count == 5
    assert benign.opcode_ratios["CONST"] == pytest.approx(2 / 5)
    assert stats["aec"].relation_ratios["control"] == pytest.approx(0.5)


def test_aggregate_empty_raises():
    with pytest.raises(EmptyGraphError):
        aggregate_stats([])


def test_table_lists_classes(corpus):
    table = format_stats_table(aggregate_stats(corpus))
    assert "benign" in table and "aec" in table
    assert "avg path length" in table


def test_csv_long_format(tmp_path, corpus):
    path = tmp_path / "stats.csv"
    write_stats_csv(aggregate_stats(corpus), path)
    rows = list(csv.DictReader(path.open()))
    metrics = {(r["class"], r["metric"], r["key"]) for r in rows}
    assert ("benign", "relation_ratio", "data") in metrics
    assert ("aec", "avg_path_length", "") in metrics


def test_figures_rendered(tmp_path, corpus):
    paths = render_stats_figures(aggregate_stats(corpus), tmp_path)
    assert len(paths) == 3
    for p in paths:
        assert p.stat().st_size > 0
