import math

import pytest
import torch

from cfdet.data import GraphData, OPCODE_VOCAB_V1, graph_from_obj
from cfdet.model import Detector, edge_embed, gumbel_sample, split_subgraphs

VOCAB = len(OPCODE_VOCAB_V1)


def make_graph(n_nodes, edges, label=1, seed=0):
    """edges: list of (src, dst, rel_index)."""
    gen = torch.Generator().manual_seed(seed)
    x = torch.zeros((n_nodes, VOCAB))
    ops = torch.randint(0, VOCAB, (n_nodes,), generator=gen)
    x[torch.arange(n_nodes), ops] = 1.0
    if edges:
        edge_index = torch.tensor([[e[0] for e in edges], [e[1] for e in edges]])
        edge_type = torch.tensor([e[2] for e in edges])
    else:
        edge_index = torch.zeros((2, 0), dtype=torch.long)
        edge_type = torch.zeros(0, dtype=torch.long)
    return GraphData("fixture", x, edge_index, edge_type, label)


FIXTURE_EDGES = [(1, 0, 1), (2, 1, 1), (3, 2, 0), (4, 3, 2), (2, 0, 1), (4, 1, 0)]


@pytest.fixture()
def fixture_graph():
    return make_graph(5, FIXTURE_EDGES)


@pytest.fixture()
def detector():
    torch.manual_seed(0)
    return Detector(in_dim=VOCAB)


# ---------------------------------------------------------------------------
# Encoder


def test_zero_edge_graph_uses_self_connections_only(detector):
    g = make_graph(4, [])
    h = detector.encoder(g)
    assert h.shape == (4, 8)
    # Identical one-hot rows must produce identical embeddings.
    g2 = make_graph(4, [])
    g2.x[:] = g.x[0]
    h2 = detector.encoder(g2)
    assert torch.allclose(h2, h2[0].expand_as(h2))


def test_permutation_equivariance(detector, fixture_graph):
    g = fixture_graph
    perm = torch.tensor([3, 0, 4, 1, 2])
    inv = torch.argsort(perm)
    permuted = GraphData(
        "perm",
        g.x[perm],
        inv[g.edge_index],
        g.edge_type.clone(),
        g.label,
    )
    h = detector.encoder(g)
    hp = detector.encoder(permuted)
    assert torch.allclose(hp, h[perm], atol=1e-6)


def test_one_layer_matches_closed_form():
    # One edge 0 -> 1 (node 0 depends on node 1): node 0 receives node 1's
    # message; node 1 keeps only its self-connection.
    torch.manual_seed(3)
    det = Detector(in_dim=4, hidden_dim=3, encoder_layers=1, relations=3)
    layer = det.encoder.layers[0]
    x = torch.randn(2, 4)
    g = GraphData(
        "tiny", x, torch.tensor([[0], [1]]), torch.tensor([1]), 0
    )
    h = det.encoder(g)
    expected_user = layer.self_loop(x[0]) + layer.rel_weights[1](x[1])
    expected_dep = layer.self_loop(x[1])
    assert torch.allclose(h[0], expected_user, atol=1e-6)
    assert torch.allclose(h[1], expected_dep, atol=1e-6)


# ---------------------------------------------------------------------------
# Edge embeddings


def test_edge_embed_equal_endpoints():
    h = torch.tensor([[2.0, 4.0], [2.0, 4.0]])
    out = edge_embed(h, torch.tensor([[0], [1]]))
    assert torch.allclose(out[0], torch.tensor([2.0, 4.0]))


def test_edge_embed_halves():
    h = torch.tensor([[2.0, 2.0], [0.0, 0.0]])
    out = edge_embed(h, torch.tensor([[0], [1]]))
    assert torch.allclose(out[0], torch.tensor([1.0, 1.0]))


def test_edge_embed_matches_dense_incidence(fixture_graph):
    torch.manual_seed(1)
    h = torch.randn(5, 8)
    m = fixture_graph.num_edges
    incidence = torch.zeros(m, 5)
    for i in range(m):
        incidence[i, fixture_graph.edge_index[0, i]] += 0.5
        incidence[i, fixture_graph.edge_index[1, i]] += 0.5
    assert torch.allclose(
        edge_embed(h, fixture_graph.edge_index), incidence @ h, atol=1e-6
    )


# ---------------------------------------------------------------------------
# Edge scorer


def test_zeroed_scorer_outputs_zero(detector, fixture_graph):
    for p in detector.scorer.parameters():
        torch.nn.init.zeros_(p)
    w = detector.edge_weights(fixture_graph)
    assert torch.allclose(w, torch.zeros_like(w))


def test_duplicate_edge_rows_duplicate_weights(detector):
    g = make_graph(3, [(0, 1, 0), (0, 1, 0), (1, 2, 1)])
    w = detector.edge_weights(g)
    assert w[0].item() == pytest.approx(w[1].item())


def test_scorer_matches_manual_mlp(detector, fixture_graph):
    h = detector.encoder(fixture_graph)
    he = edge_embed(h, fixture_graph.edge_index)
    lin1, _, lin2 = detector.scorer.net
    manual = lin2(torch.relu(lin1(he))).squeeze(-1)
    assert torch.allclose(detector.edge_weights(fixture_graph), manual, atol=1e-6)


# ---------------------------------------------------------------------------
# Gumbel sampling


def test_gumbel_median_noise_is_sigmoid():
    w = torch.tensor([0.0, 1.0, -3.0])
    for tau in (0.1, 1.0, 4.0):
        p = gumbel_sample(w, tau)
        assert p[0] == pytest.approx(0.5)
    p = gumbel_sample(w, 1.0)
    assert torch.allclose(p, torch.sigmoid(w))


def test_gumbel_rejects_nonpositive_tau():
    with pytest.raises(ValueError):
        gumbel_sample(torch.zeros(3), 0.0)


def test_gumbel_exceedance_probability_matches_sigmoid():
    # P(p > 0.5) == sigmoid(w) regardless of temperature.
    gen = torch.Generator().manual_seed(9)
    n = 100_000
    for w0 in (-2.0, 0.0, 2.0):
        for tau in (0.1, 1.0):
            delta = torch.rand(n, generator=gen)
            p = gumbel_sample(torch.full((n,), w0), tau, delta)
            emp = (p > 0.5).float().mean().item()
            assert emp == pytest.approx(torch.sigmoid(torch.tensor(w0)).item(), abs=0.02)


# ---------------------------------------------------------------------------
# Subgraph split


def test_split_all_ones():
    p = torch.ones(4)
    s, r = split_subgraphs(p, 0.5)
    assert s.all() and not r.any()


def test_split_all_zeros():
    p = torch.zeros(4)
    s, r = split_subgraphs(p, 0.5)
    assert not s.any() and r.all()


def test_split_matches_elementwise_comparison():
    gen = torch.Generator().manual_seed(4)
    p = torch.rand(64, generator=gen)
    s, r = split_subgraphs(p, 0.5)
    for i in range(64):
        assert s[i].item() == (p[i].item() > 0.5)
        assert r[i].item() == (p[i].item() <= 0.5)
    assert not (s & r).any()
    assert (s | r).all()


# ---------------------------------------------------------------------------
# Subgraph forward


def test_whole_graph_subset_matches_full_embedding(detector, fixture_graph):
    mask = torch.ones(fixture_graph.num_edges, dtype=torch.bool)
    z, p = detector.subgraph_forward(fixture_graph, mask)
    # All nodes are edge endpoints in this fixture, so the pooled set is V.
    full = detector.graph_embedding(fixture_graph)
    assert torch.allclose(z, full, atol=1e-6)
    assert 0.0 <= p.item() <= 1.0


def test_empty_subset_zero_embedding(detector, fixture_graph):
    mask = torch.zeros(fixture_graph.num_edges, dtype=torch.bool)
    z, p = detector.subgraph_forward(fixture_graph, mask)
    assert torch.allclose(z, torch.zeros(8))
    expected = torch.sigmoid(detector.classifier(torch.zeros(8)))
    assert p.item() == pytest.approx(expected.item())


def test_isomorphic_subgraphs_equal_probability(detector):
    edges = [(0, 1, 0), (2, 3, 0)]
    g = make_graph(4, edges)
    g.x[2] = g.x[0]
    g.x[3] = g.x[1]
    m1 = torch.tensor([True, False])
    m2 = torch.tensor([False, True])
    _, p1 = detector.subgraph_forward(g, m1)
    _, p2 = detector.subgraph_forward(g, m2)
    assert p1.item() == pytest.approx(p2.item(), abs=1e-6)


def test_single_node_closed_form(detector):
    g = make_graph(2, [(0, 1, 0)])
    mask = torch.tensor([True])
    z, p = detector.subgraph_forward(g, mask)
    h = detector.encoder(g, mask.float())
    expected = torch.sigmoid(detector.classifier(h[:2].mean(dim=0)))
    assert p.item() == pytest.approx(expected.item(), abs=1e-6)


# ---------------------------------------------------------------------------
# predict_explain


def test_explanation_partitions_edges(detector, fixture_graph):
    label, p_g, expl = detector.predict_explain(fixture_graph)
    all_ids = set(expl.factual_edges) | set(expl.counterfactual_edges)
    assert all_ids == set(range(fixture_graph.num_edges))
    assert not set(expl.factual_edges) & set(expl.counterfactual_edges)
    assert label in (0, 1)
    assert 0.0 <= p_g <= 1.0


def test_large_weights_put_everything_factual(detector, fixture_graph):
    with torch.no_grad():
        detector.scorer.net[-1].bias.fill_(50.0)
    _, _, expl = detector.predict_explain(fixture_graph)
    assert len(expl.factual_edges) == fixture_graph.num_edges


def test_prediction_permutation_invariant(detector, fixture_graph):
    g = fixture_graph
    perm = torch.tensor([4, 2, 0, 3, 1])
    inv = torch.argsort(perm)
    permuted = GraphData("perm", g.x[perm], inv[g.edge_index], g.edge_type.clone(), g.label)
    _, p1, _ = detector.predict_explain(g)
    _, p2, _ = detector.predict_explain(permuted)
    assert p1 == pytest.approx(p2, abs=1e-6)
