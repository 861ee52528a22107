"""Training losses: counterfactual, sparsity, and classification terms.

All logarithm arguments are clamped below at 1e-8.
"""

from __future__ import annotations

import torch

LOG_EPS = 1e-8


def _safe_log(x: torch.Tensor) -> torch.Tensor:
    return torch.log(x.clamp_min(LOG_EPS))


def loss_cf(p_s: torch.Tensor, p_r: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Counterfactual loss.

    For benign graphs both subgraph probabilities are pushed to zero; for
    flagged graphs the factual probability is pushed to one and the
    counterfactual to zero. Zero exactly at those ideal configurations.
    """
    benign_term = _safe_log(1.0 + p_s + p_r)
    flagged_term = -_safe_log((1.0 + p_s - p_r) / 2.0)
    return (1.0 - y) * benign_term + y * flagged_term


def loss_sp(w: torch.Tensor) -> torch.Tensor:
    """Sparsity: L1 norm of the edge weights."""
    return w.abs().sum()


def loss_cl(
    z_g: torch.Tensor,
    z_s: torch.Tensor,
    y: torch.Tensor,
    classifier: torch.nn.Module,
    pos_weight: float = 1.0,
) -> torch.Tensor:
    """Binary cross-entropy on the merged embedding mean(z_g, z_s)."""
    z_m = 0.5 * (z_g + z_s)
    p = torch.sigmoid(classifier(z_m).squeeze(-1))
    return -(
        pos_weight * y * _safe_log(p) + (1.0 - y) * _safe_log(1.0 - p)
    )
