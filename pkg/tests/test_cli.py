import json
from pathlib import Path

import pytest

from semrel.cli import main
from semrel.graphio import from_json, to_json
from semrel.srg import SRG, Diagnostics, SemanticNode, TypedEdge


@pytest.fixture()
def bytecode_dir(tmp_path):
    d = tmp_path / "code"
    d.mkdir()
    (d / "alpha.hex").write_text("0x6080604001602001\n")
    (d / "beta.hex").write_text("600160540150600255\n")
    (d / "gamma.hex").write_text("5b600056\n")
    return d


def run(argv):
    return main([str(a) for a in argv])


def test_build_three_files(bytecode_dir, tmp_path, capsys):
    out = tmp_path / "graphs"
    rc = run(["build", *sorted(bytecode_dir.glob("*.hex")), "--out", out, "--jobs", 1])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "3 ok, 0 failed"
    assert sorted(p.name for p in out.glob("*.json")) == [
        "alpha.json", "beta.json", "gamma.json",
    ]


def test_build_empty_manifest_exit_2(tmp_path, capsys):
    manifest = tmp_path / "empty.jsonl"
    manifest.write_text("")
    rc = run(["build", "--manifest", manifest, "--out", tmp_path / "o"])
    assert rc == 2


def test_build_partial_failure_still_succeeds(tmp_path, capsys):
    d = tmp_path / "code"
    d.mkdir()
    (d / "good.hex").write_text("6001600201\n")
    (d / "bad.hex").write_text("0xZZZZ\n")
    rc = run(["build", d / "good.hex", d / "bad.hex", "--out", tmp_path / "o", "--jobs", 1])
    assert rc == 0
    assert "1 ok, 1 failed" in capsys.readouterr().out


def test_build_idempotent_outputs(bytecode_dir, tmp_path):
    out1, out2 = tmp_path / "g1", tmp_path / "g2"
    run(["build", bytecode_dir / "alpha.hex", "--out", out1, "--jobs", 1])
    run(["build", bytecode_dir / "alpha.hex", "--out", out2, "--jobs", 1])
    assert (out1 / "alpha.json").read_bytes() == (out2 / "alpha.json").read_bytes()


def test_build_parallel_matches_serial(bytecode_dir, tmp_path):
    out1, out2 = tmp_path / "serial", tmp_path / "parallel"
    run(["build", *sorted(bytecode_dir.glob("*.hex")), "--out", out1, "--jobs", 1])
    run(["build", *sorted(bytecode_dir.glob("*.hex")), "--out", out2, "--jobs", 2])
    for name in ("alpha.json", "beta.json", "gamma.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


@pytest.fixture()
def graph_dir(bytecode_dir, tmp_path):
    out = tmp_path / "graphs"
    run(["build", *sorted(bytecode_dir.glob("*.hex")), "--out", out, "--jobs", 1])
    # Attach labels so stats can split into classes.
    for i, p in enumerate(sorted(out.glob("*.json"))):
        g = from_json(p.read_bytes())
        g.label = i % 2
        p.write_bytes(to_json(g))
    return out


def test_stats_labeled_corpus(graph_dir, tmp_path, capsys):
    rc = run(["stats", graph_dir, "--out", tmp_path / "report"])
    assert rc == 0
    table = capsys.readouterr().out
    assert "benign" in table and "aec" in table
    report = tmp_path / "report"
    assert (report / "stats.csv").is_file()
    for name in ("opcode_frequency.png", "relation_ratios.png", "path_length.png"):
        assert (report / name).stat().st_size > 0


def test_stats_single_unlabeled_graph(tmp_path, capsys):
    g = SRG("solo", [SemanticNode(0, 0, "CONST"), SemanticNode(1, 1, "ADD")],
            [TypedEdge(1, 0, "data")], None, Diagnostics())
    p = tmp_path / "solo.json"
    p.write_bytes(to_json(g))
    rc = run(["stats", p])
    assert rc == 0
    assert "unlabeled" in capsys.readouterr().out


def test_stats_no_valid_graphs_exit_2(tmp_path, capsys):
    d = tmp_path / "junk"
    d.mkdir()
    (d / "readme.txt").write_text("not a graph")
    assert run(["stats", d]) == 2


def test_stats_json_output(graph_dir, capsys):
    rc = run(["stats", graph_dir, "--json"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) == {"benign", "aec"}


def test_perturb_gia_writes_all_graphs(graph_dir, tmp_path, capsys):
    out = tmp_path / "pert"
    rc = run(["perturb", graph_dir, "--attack", "gia:50:2", "--seed", 1, "--out", out])
    assert rc == 0
    assert len(list(out.glob("*[!e].json"))) >= 3
    prov = json.loads((out / "alpha.provenance.json").read_text())
    assert prov["attack"] == "gia:50:2"
    assert prov["seed"] == 1
    g0 = from_json((graph_dir / "alpha.json").read_bytes())
    g1 = from_json((out / "alpha.json").read_bytes())
    assert len(g1.nodes) > len(g0.nodes)
    assert set(prov["injected_nodes"]) == {n.id for n in g1.nodes} - {n.id for n in g0.nodes}


def test_perturb_lfa_flips_labels(graph_dir, tmp_path, capsys):
    out = tmp_path / "lfa"
    rc = run(["perturb", graph_dir, "--attack", "lfa:34", "--seed", 0, "--out", out])
    assert rc == 0
    prov = json.loads((out / "provenance.json").read_text())
    assert len(prov["flipped_ids"]) == 1  # round(3 * 0.34) == 1
    for p in graph_dir.glob("*.json"):
        before = from_json(p.read_bytes())
        after = from_json((out / p.name).read_bytes())
        if before.contract_id in prov["flipped_ids"]:
            assert after.label == 1 - before.label
        else:
            assert after.label == before.label


def test_perturb_bad_attack_exit_2(graph_dir, tmp_path):
    assert run(["perturb", graph_dir, "--attack", "gia:0:5", "--out", tmp_path / "x"]) == 2


def test_export_dot_plain(graph_dir, capsys):
    rc = run(["export-dot", graph_dir / "alpha.json"])
    assert rc == 0
    assert "digraph" in capsys.readouterr().out


def test_export_dot_with_highlight(graph_dir, tmp_path, capsys):
    expl = tmp_path / "expl.json"
    expl.write_text(json.dumps({"contract_id": "alpha", "p_g": 0.9, "p_s": 0.8,
                                "p_r": 0.1, "factual_edges": [0],
                                "counterfactual_edges": []}))
    rc = run(["export-dot", graph_dir / "alpha.json", "--highlight", expl])
    assert rc == 0
    assert "orange" in capsys.readouterr().out


def test_export_dot_absent_edge_exit_2(graph_dir, tmp_path, capsys):
    expl = tmp_path / "expl.json"
    expl.write_text(json.dumps({"factual_edges": [10_000]}))
    assert run(["export-dot", graph_dir / "alpha.json", "--highlight", expl]) == 2


def test_split_command(tmp_path, capsys):
    manifest = tmp_path / "m.jsonl"
    rows = [
        {"id": f"c{i}", "bytecode_path": f"{i}.hex", "label": i % 2}
        for i in range(10)
    ]
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    plan_path = tmp_path / "plan.json"
    rc = run(["split", "--manifest", manifest, "--strategy", "kfold:5",
              "--seed", 3, "--out", plan_path])
    assert rc == 0
    plan = json.loads(plan_path.read_text())
    assert len(plan["assignments"]) == 10


def test_fetch_requires_endpoint(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("SEASONED_RPC_URL", raising=False)
    assert run(["fetch", "--address", "0x" + "11" * 20]) == 2
