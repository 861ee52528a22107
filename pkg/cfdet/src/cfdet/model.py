"""Detector model: relation-typed graph encoder, edge scorer, and the
threshold split into factual/counterfactual subgraphs.

The encoder is a 2-layer relational graph convolution with one weight per
relation plus a self-connection, sum aggregation, and ReLU between layers.
Edge embeddings average the two endpoint node embeddings; a 2-layer MLP
maps them to scalar edge weights. Relaxed Bernoulli samples (logistic
noise, temperature tau) decide edge membership: during training the
sampled probabilities act as soft message weights, at inference the noise
is fixed at its median so the split is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import torch
from torch import nn

from .data import GraphData

EPS = 1e-6


@dataclass
class Explanation:
    factual_edges: list[int]
    counterfactual_edges: list[int]
    p_s: float
    p_r: float
    p_g: float

    def to_obj(self, contract_id: str) -> dict:
        return {
            "contract_id": contract_id,
            "p_g": self.p_g,
            "p_s": self.p_s,
            "p_r": self.p_r,
            "factual_edges": self.factual_edges,
            "counterfactual_edges": self.counterfactual_edges,
        }


class RelGraphLayer(nn.Module):
    """One round of relation-typed message passing.

    Messages into a node are averaged per relation (the usual relational
    graph convolution normalization), which keeps embedding magnitudes
    independent of degree; soft edge memberships scale both the messages
    and the normalizer, with the normalizer floored at one so a nearly
    masked-out neighborhood passes nearly nothing.

    With ``embedding_init`` the weights are drawn like embedding tables
    (unit variance per entry): appropriate when the input rows are one-hot,
    where fan-in-scaled init would shrink every activation to ~1/sqrt(in_dim).
    """

    def __init__(self, in_dim: int, out_dim: int, relations: int,
                 embedding_init: bool = False):
        super().__init__()
        self.self_loop = nn.Linear(in_dim, out_dim)
        self.rel_weights = nn.ModuleList(
            nn.Linear(in_dim, out_dim, bias=False) for _ in range(relations)
        )
        if embedding_init:
            nn.init.normal_(self.self_loop.weight, std=1.0)
            nn.init.zeros_(self.self_loop.bias)
            for lin in self.rel_weights:
                nn.init.normal_(lin.weight, std=1.0)

    def forward(
        self,
        h: torch.Tensor,
        edge_index: torch.Tensor,
        edge_type: torch.Tensor,
        edge_weight: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        out = self.self_loop(h)
        if edge_index.shape[1] == 0:
            return out
        # An edge points dependent -> dependency; information flows from the
        # dependency into the node that uses it.
        receiver, sender = edge_index[0], edge_index[1]
        for rel, lin in enumerate(self.rel_weights):
            mask = edge_type == rel
            if not bool(mask.any()):
                continue
            msg = lin(h[sender[mask]])
            weight = (
                edge_weight[mask]
                if edge_weight is not None
                else torch.ones(int(mask.sum()), dtype=h.dtype, device=h.device)
            )
            msg = msg * weight.unsqueeze(-1)
            denom = h.new_zeros(h.shape[0]).index_add(0, receiver[mask], weight)
            summed = out.new_zeros(h.shape[0], msg.shape[1]).index_add(
                0, receiver[mask], msg
            )
            out = out + summed / denom.clamp_min(1.0).unsqueeze(-1)
        return out


class RelGraphEncoder(nn.Module):
    """Stacked relational layers; ReLU between layers only."""

    def __init__(self, in_dim: int, hidden_dim: int, layers: int, relations: int):
        super().__init__()
        dims = [in_dim] + [hidden_dim] * layers
        self.layers = nn.ModuleList(
            RelGraphLayer(dims[i], dims[i + 1], relations, embedding_init=(i == 0))
            for i in range(layers)
        )

    def forward(
        self,
        g: GraphData,
        edge_weight: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        h = g.x
        for i, layer in enumerate(self.layers):
            h = layer(h, g.edge_index, g.edge_type, edge_weight)
            if i + 1 < len(self.layers):
                h = torch.relu(h)
        return h


class EdgeScorer(nn.Module):
    """2-layer MLP from edge embeddings to scalar edge weights."""

    def __init__(self, dim: int, hidden_dim: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(dim, hidden_dim), nn.ReLU(), nn.Linear(hidden_dim, 1)
        )

    def forward(self, h_edges: torch.Tensor) -> torch.Tensor:
        return self.net(h_edges).squeeze(-1)


def edge_embed(h_nodes: torch.Tensor, edge_index: torch.Tensor) -> torch.Tensor:
    """Each edge embedding is the average of its endpoint embeddings
    (the incidence-matrix product with 0.5 entries)."""
    return 0.5 * (h_nodes[edge_index[0]] + h_nodes[edge_index[1]])


def gumbel_sample(
    w: torch.Tensor, tau: float, delta: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Relaxed Bernoulli via logistic reparametrization:
    sigmoid((log d - log(1-d) + w) / tau) with d ~ Uniform(0,1).

    Pass delta=None for inference (fixed at the median 0.5).
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if delta is None:
        delta = torch.full_like(w, 0.5)
    delta = delta.clamp(EPS, 1.0 - EPS)
    return torch.sigmoid((torch.log(delta) - torch.log1p(-delta) + w) / tau)


def split_subgraphs(p: torch.Tensor, rho: float) -> tuple[torch.Tensor, torch.Tensor]:
    """Boolean masks (factual, counterfactual): p > rho goes factual."""
    factual = p > rho
    return factual, ~factual


class Detector(nn.Module):
    """Encoder f, edge scorer g, and classifier head phi."""

    def __init__(
        self,
        in_dim: int,
        hidden_dim: int = 8,
        encoder_layers: int = 2,
        relations: int = 3,
        tau: float = 0.15,
        rho: float = 0.5,
    ):
        super().__init__()
        self.encoder = RelGraphEncoder(in_dim, hidden_dim, encoder_layers, relations)
        self.scorer = EdgeScorer(hidden_dim, hidden_dim)
        self.classifier = nn.Linear(hidden_dim, 1)
        self.tau = tau
        self.rho = rho
        self.hidden_dim = hidden_dim

    # -- pieces -----------------------------------------------------------

    def edge_weights(self, g: GraphData) -> torch.Tensor:
        h = self.encoder(g)
        return self.scorer(edge_embed(h, g.edge_index))

    def graph_embedding(
        self, g: GraphData, edge_weight: Optional[torch.Tensor] = None
    ) -> torch.Tensor:
        """Mean-pooled node embeddings (over all nodes)."""
        h = self.encoder(g, edge_weight)
        if h.shape[0] == 0:
            return h.new_zeros(self.hidden_dim)
        return h.mean(dim=0)

    def probability(self, z: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.classifier(z).squeeze(-1))

    def subgraph_forward(
        self, g: GraphData, edge_mask: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Hard-subset forward: messages flow only along masked edges and
        pooling covers the subgraph's node set (endpoint union). An empty
        subset falls back to a zero embedding."""
        members = torch.unique(g.edge_index[:, edge_mask])
        if members.numel() == 0:
            z = g.x.new_zeros(self.hidden_dim)
            return z, self.probability(z)
        h = self.encoder(g, edge_mask.to(g.x.dtype))
        z = h[members].mean(dim=0)
        return z, self.probability(z)

    # -- full passes --------------------------------------------------------

    def soft_subgraph_embedding(
        self, g: GraphData, edge_prob: torch.Tensor
    ) -> torch.Tensor:
        """Relaxed subgraph embedding: messages weighted by edge membership
        and nodes pooled by their strongest incident membership, so a fully
        saturated membership vector reproduces the hard subgraph forward."""
        h = self.encoder(g, edge_prob)
        node_w = h.new_zeros(g.num_nodes)
        if g.num_edges:
            for endpoints in g.edge_index:
                node_w = node_w.scatter_reduce(
                    0, endpoints, edge_prob, reduce="amax", include_self=True
                )
        total = node_w.sum()
        if float(total.detach()) <= 0.0:
            return h.new_zeros(self.hidden_dim)
        return (h * node_w.unsqueeze(-1)).sum(dim=0) / total

    def training_pass(
        self, g: GraphData, delta: Optional[torch.Tensor]
    ) -> dict[str, torch.Tensor]:
        """One differentiable forward: soft factual/counterfactual weights.

        ``delta`` carries the per-edge noise draw (None fixes it at 0.5).
        """
        h = self.encoder(g)
        w = self.scorer(edge_embed(h, g.edge_index))
        p = gumbel_sample(w, self.tau, delta)
        z_g = self.graph_embedding(g)
        z_s = self.soft_subgraph_embedding(g, p)
        z_r = self.soft_subgraph_embedding(g, 1.0 - p)
        z_m = 0.5 * (z_g + z_s)
        return {
            "w": w,
            "p": p,
            "z_g": z_g,
            "z_s": z_s,
            "z_r": z_r,
            "p_s": self.probability(z_s),
            "p_r": self.probability(z_r),
            "p_g": self.probability(z_m),
        }

    @torch.no_grad()
    def predict_explain(self, g: GraphData) -> tuple[int, float, Explanation]:
        """Deterministic inference: median noise, hard threshold split."""
        w = self.edge_weights(g) if g.num_edges else g.x.new_zeros(0)
        p = gumbel_sample(w, self.tau)
        factual, counterfactual = split_subgraphs(p, self.rho)
        z_s, p_s = self.subgraph_forward(g, factual)
        _, p_r = self.subgraph_forward(g, counterfactual)
        z_g = self.graph_embedding(g)
        p_g = self.probability(0.5 * (z_g + z_s))
        label = int(p_g.item() > 0.5)
        expl = Explanation(
            factual_edges=torch.nonzero(factual).squeeze(-1).tolist(),
            counterfactual_edges=torch.nonzero(counterfactual).squeeze(-1).tolist(),
            p_s=float(p_s.item()),
            p_r=float(p_r.item()),
            p_g=float(p_g.item()),
        )
        return label, float(p_g.item()), expl
