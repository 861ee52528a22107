"""Neural mutual-information estimation via the Donsker-Varadhan bound.

The estimate for a batch of paired embeddings is

    E_joint[t(a, b)] - log E_marginal[exp t(a, b_perm)]

with the marginal formed by permuting b within the batch. The trainer
maximizes the bound with an exponential-moving-average correction on the
log-partition gradient (the standard stabilization for this estimator).
"""

from __future__ import annotations

from typing import Optional

import torch
from torch import nn


class DegenerateBatchError(ValueError):
    """The estimator needs at least two pairs to form a marginal."""


class MineEstimator(nn.Module):
    """Critic t: concat(a, b) -> scalar score.

    With ``lipschitz`` the inputs are tanh-squashed (invertible, so the
    mutual information being bounded is unchanged) and every layer is
    spectral-normalized. The bounded variant trades estimation accuracy
    for moderate input gradients, which is what keeps the bi-level
    training stable when the bound is minimized through the embeddings;
    plain estimation should use the unconstrained default.
    """

    def __init__(self, dim: int, hidden_dim: int = 16, lipschitz: bool = False):
        super().__init__()
        self.lipschitz = lipschitz
        layers = [
            nn.Linear(2 * dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, 1),
        ]
        if lipschitz:
            sn = nn.utils.parametrizations.spectral_norm
            layers = [sn(m) if isinstance(m, nn.Linear) else m for m in layers]
        self.net = nn.Sequential(*layers)

    def forward(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        x = torch.cat([a, b], dim=-1)
        if self.lipschitz:
            x = torch.tanh(x)
        return self.net(x).squeeze(-1)


def dv_bound(
    estimator: MineEstimator,
    a: torch.Tensor,
    b: torch.Tensor,
    perm: torch.Tensor,
) -> torch.Tensor:
    """Donsker-Varadhan value for one batch and one fixed permutation."""
    if a.shape[0] < 2:
        raise DegenerateBatchError(f"batch of {a.shape[0]} cannot form a marginal")
    joint = estimator(a, b).mean()
    marginal = torch.exp(estimator(a, b[perm])).mean()
    return joint - torch.log(marginal.clamp_min(1e-12))


def grouped_permutation(
    n: int,
    generator: torch.Generator,
    groups: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Random permutation; with ``groups`` given, indices only move within
    their group, so the shuffled pairing preserves the group variable (a
    class-conditional marginal)."""
    if groups is None:
        return torch.randperm(n, generator=generator)
    perm = torch.arange(n)
    for value in torch.unique(groups):
        members = torch.nonzero(groups == value).squeeze(-1)
        if members.numel() > 1:
            shuffled = members[torch.randperm(members.numel(), generator=generator)]
            perm[members] = shuffled
    return perm


class MineTrainer:
    """Inner-loop optimizer for the critic."""

    def __init__(self, estimator: MineEstimator, lr: float = 1e-3, ema_rate: float = 0.99):
        self.estimator = estimator
        self.optimizer = torch.optim.Adam(estimator.parameters(), lr=lr)
        self.ema_rate = ema_rate
        self.ema: Optional[float] = None

    def step(
        self,
        a: torch.Tensor,
        b: torch.Tensor,
        generator: torch.Generator,
        groups: Optional[torch.Tensor] = None,
    ) -> float:
        """One maximization step; returns the current bound value."""
        if a.shape[0] < 2:
            raise DegenerateBatchError(f"batch of {a.shape[0]} cannot form a marginal")
        a = a.detach()
        b = b.detach()
        perm = grouped_permutation(a.shape[0], generator, groups)
        joint = self.estimator(a, b).mean()
        exp_marginal = torch.exp(self.estimator(a, b[perm])).mean()
        value = exp_marginal.item()
        self.ema = value if self.ema is None else (
            self.ema_rate * self.ema + (1.0 - self.ema_rate) * value
        )
        # Dividing by the EMA instead of the batch value unbiases the
        # log-partition gradient.
        surrogate = joint - exp_marginal / max(self.ema, 1e-12)
        self.optimizer.zero_grad()
        (-surrogate).backward()
        self.optimizer.step()
        with torch.no_grad():
            return float((joint - torch.log(exp_marginal.clamp_min(1e-12))).item())


def estimate_mi(
    estimator: MineEstimator,
    a: torch.Tensor,
    b: torch.Tensor,
    generator: torch.Generator,
    samples: int = 8,
    groups: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Bound value averaged over several marginal permutations, clamped at
    zero (mutual information is non-negative; a negative bound is estimator
    noise and would otherwise reward scrambling the embeddings). Gradients
    flow into a and b; the permutations are treated as fixed. With
    ``groups`` the marginal is group-conditional."""
    values = [
        dv_bound(estimator, a, b, grouped_permutation(a.shape[0], generator, groups))
        for _ in range(samples)
    ]
    return torch.relu(torch.stack(values).mean())
