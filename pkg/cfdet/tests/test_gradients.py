"""Autograd gradients versus central finite differences on a 5-node
fixture, in float64. Relative error is measured as
||g_auto - g_fd|| / max(||g_auto||, ||g_fd||).
"""

import pytest
import torch

from cfdet.data import GraphData
from cfdet.losses import loss_cf, loss_cl, loss_sp
from cfdet.mine import MineEstimator, dv_bound
from cfdet.model import Detector, edge_embed, gumbel_sample

TOL = 1e-4


def fixture_graph(dtype=torch.float64):
    torch.manual_seed(7)
    x = torch.zeros(5, 12, dtype=dtype)
    for i, op in enumerate([0, 3, 5, 3, 9]):
        x[i, op] = 1.0
    edge_index = torch.tensor([[1, 2, 3, 4, 2, 4], [0, 1, 2, 3, 0, 1]])
    edge_type = torch.tensor([0, 1, 2, 0, 1, 2])
    return GraphData("grad-fixture", x, edge_index, edge_type, 1)


def build_detector():
    torch.manual_seed(11)
    det = Detector(in_dim=12, hidden_dim=4, tau=0.7).double()
    return det


def relative_error(auto: torch.Tensor, fd: torch.Tensor) -> float:
    # The floor absorbs parameters whose true gradient is exactly zero
    # (e.g. a bias the objective is invariant to), where both sides are
    # pure roundoff noise.
    denom = max(auto.norm().item(), fd.norm().item(), 1e-5)
    return (auto - fd).norm().item() / denom


def check_gradients(module: torch.nn.Module, loss_fn, h=1e-6):
    """loss_fn: () -> scalar tensor, closing over module parameters."""
    params = [p for p in module.parameters() if p.requires_grad]
    module.zero_grad()
    loss = loss_fn()
    loss.backward()
    autos = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
             for p in params]
    for p, auto in zip(params, autos):
        fd = torch.zeros_like(p)
        flat = p.data.view(-1)
        fd_flat = fd.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            up = loss_fn().item()
            flat[i] = orig - h
            down = loss_fn().item()
            flat[i] = orig
            fd_flat[i] = (up - down) / (2 * h)
        assert relative_error(auto, fd) < TOL, f"{p.shape}: {relative_error(auto, fd)}"


def detector_losses(det: Detector, g: GraphData, delta: torch.Tensor):
    h = det.encoder(g)
    w = det.scorer(edge_embed(h, g.edge_index))
    p = gumbel_sample(w, det.tau, delta)
    z_g = det.graph_embedding(g)
    z_s = det.soft_subgraph_embedding(g, p)
    z_r = det.soft_subgraph_embedding(g, 1.0 - p)
    p_s = det.probability(z_s)
    p_r = det.probability(z_r)
    return w, z_g, z_s, p_s, p_r


def test_loss_cf_gradients_match_central_differences():
    det = build_detector()
    g = fixture_graph()
    delta = torch.rand(g.num_edges, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(1))
    y = torch.tensor(1.0, dtype=torch.float64)

    def compute():
        _, _, _, p_s, p_r = detector_losses(det, g, delta)
        return loss_cf(p_s, p_r, y)

    check_gradients(det, compute)


def test_loss_sp_gradients_match_central_differences():
    det = build_detector()
    g = fixture_graph()

    def compute():
        h = det.encoder(g)
        return loss_sp(det.scorer(edge_embed(h, g.edge_index)))

    check_gradients(det, compute)


def test_loss_cl_gradients_match_central_differences():
    det = build_detector()
    g = fixture_graph()
    delta = torch.rand(g.num_edges, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(2))
    y = torch.tensor(0.0, dtype=torch.float64)

    def compute():
        _, z_g, z_s, _, _ = detector_losses(det, g, delta)
        return loss_cl(z_g, z_s, y, det.classifier)

    check_gradients(det, compute)


def test_dv_bound_gradients_match_central_differences():
    torch.manual_seed(13)
    estimator = MineEstimator(4, hidden_dim=8).double()
    gen = torch.Generator().manual_seed(3)
    a = torch.randn(12, 4, dtype=torch.float64, generator=gen)
    b = torch.randn(12, 4, dtype=torch.float64, generator=gen)
    perm = torch.randperm(12, generator=gen)
    # Freeze the spectral-norm power iteration so repeated evaluations are
    # deterministic for the finite differences.
    estimator(a, b)
    estimator.eval()

    def compute():
        return dv_bound(estimator, a, b, perm)

    check_gradients(estimator, compute)


def test_combined_objective_gradients():
    det = build_detector()
    g = fixture_graph()
    delta = torch.rand(g.num_edges, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(4))
    y = torch.tensor(1.0, dtype=torch.float64)

    def compute():
        w, z_g, z_s, p_s, p_r = detector_losses(det, g, delta)
        return (
            loss_cl(z_g, z_s, y, det.classifier)
            + 0.5 * loss_cf(p_s, p_r, y)
            + 0.1 * loss_sp(w)
        )

    check_gradients(det, compute)
