"""Bi-level training: the outer loop fits the detector on the combined
classification, counterfactual, mutual-information, and sparsity
objective; the inner loop refits the information critic between outer
steps with the detector frozen.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import torch

from .data import GraphData, OPCODE_VOCAB_V1
from .losses import loss_cf, loss_cl, loss_sp
from .mine import MineEstimator, MineTrainer, estimate_mi
from .model import Detector


class EmptyDatasetError(ValueError):
    pass


class SingleClassDatasetError(ValueError):
    pass


@dataclass
class TrainConfig:
    hidden_dim: int = 8
    encoder_layers: int = 2
    relations: int = 3
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.1
    rho: float = 0.5
    tau: float = 0.15
    lr: float = 1e-3
    outer_epochs: int = 50
    inner_epochs: int = 100
    seed: int = 0
    pos_weight: float = 1.0
    mine_hidden: int = 16
    mine_lr: float = 1e-3
    batch_size: int = 8  # minibatch steps within each outer epoch
    beta_warmup_frac: float = 0.2  # ramp the MI weight over this epoch fraction

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        return cls(**json.loads(Path(path).read_text()))


@dataclass
class TrainResult:
    detector: Detector
    estimator: MineEstimator
    config: TrainConfig
    curves: list[dict] = field(default_factory=list)

    @property
    def final_mi(self) -> float:
        return self.curves[-1]["mi"] if self.curves else float("nan")


def train(graphs: Sequence[GraphData], config: TrainConfig) -> TrainResult:
    """Fit the detector; deterministic given the config seed."""
    train_graphs = [g for g in graphs if g.label in (0, 1)]
    if not train_graphs:
        raise EmptyDatasetError("no labeled graphs to train on")
    labels = {g.label for g in train_graphs}
    if len(labels) < 2:
        raise SingleClassDatasetError(f"training set has only label {labels.pop()}")

    torch.manual_seed(config.seed)
    detector = Detector(
        in_dim=len(OPCODE_VOCAB_V1),
        hidden_dim=config.hidden_dim,
        encoder_layers=config.encoder_layers,
        relations=config.relations,
        tau=config.tau,
        rho=config.rho,
    )
    estimator = MineEstimator(config.hidden_dim, config.mine_hidden, lipschitz=True)
    optimizer = torch.optim.Adam(detector.parameters(), lr=config.lr)
    mine_trainer = MineTrainer(estimator, lr=config.mine_lr)
    noise = torch.Generator().manual_seed(config.seed)

    y = torch.tensor([float(g.label) for g in train_graphs])
    n = len(train_graphs)
    batch_size = max(2, min(config.batch_size, n))
    curves: list[dict] = []
    for epoch in range(config.outer_epochs):
        detector.train()
        # The MI weight ramps in so the counterfactual loss can establish
        # the factual subgraph before the bottleneck pressure starts
        # pruning redundancy (annealing, as usual for these objectives).
        warmup = max(1, int(config.outer_epochs * config.beta_warmup_frac))
        beta = config.beta * min(1.0, (epoch + 1) / warmup)

        # Inner loop: refit the critic on the whole split's current
        # embeddings with the detector frozen.
        mi_value = 0.0
        if config.inner_epochs > 0 and n >= 2:
            with torch.no_grad():
                frozen = [
                    detector.training_pass(g, torch.rand(g.num_edges, generator=noise))
                    for g in train_graphs
                ]
                zs_all = torch.stack([o["z_s"] for o in frozen])
                zg_all = torch.stack([o["z_g"] for o in frozen])
            for _ in range(config.inner_epochs):
                mi_value = mine_trainer.step(zs_all, zg_all, noise, groups=y)

        # Outer objective, one Adam step per minibatch.
        order = torch.randperm(n, generator=noise).tolist()
        batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
        if len(batches) > 1 and len(batches[-1]) < 2:
            batches[-2].extend(batches.pop())
        sums = {"loss": 0.0, "loss_cl": 0.0, "loss_cf": 0.0, "loss_sp": 0.0}
        for batch in batches:
            outs = []
            for idx in batch:
                g = train_graphs[idx]
                outs.append(
                    detector.training_pass(g, torch.rand(g.num_edges, generator=noise))
                )
            l_cl = torch.stack(
                [
                    loss_cl(o["z_g"], o["z_s"], y[i], detector.classifier, config.pos_weight)
                    for i, o in zip(batch, outs)
                ]
            ).mean()
            l_cf = torch.stack(
                [loss_cf(o["p_s"], o["p_r"], y[i]) for i, o in zip(batch, outs)]
            ).mean()
            l_sp = torch.stack([loss_sp(o["w"]) for o in outs]).mean()
            loss = l_cl + config.alpha * l_cf + config.gamma * l_sp
            if beta != 0.0 and len(batch) >= 2:
                # Critic frozen; the penalty backpropagates through the
                # embeddings only.
                z_s = torch.stack([o["z_s"] for o in outs])
                z_g = torch.stack([o["z_g"] for o in outs])
                y_batch = y[torch.tensor(batch)]
                for p in estimator.parameters():
                    p.requires_grad_(False)
                loss = loss + beta * estimate_mi(
                    estimator, z_s, z_g, noise, groups=y_batch
                )
                for p in estimator.parameters():
                    p.requires_grad_(True)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            weight = len(batch) / n
            sums["loss"] += float(loss.item()) * weight
            sums["loss_cl"] += float(l_cl.item()) * weight
            sums["loss_cf"] += float(l_cf.item()) * weight
            sums["loss_sp"] += float(l_sp.item()) * weight
        curves.append({"epoch": epoch, "mi": float(mi_value), **sums})
    detector.eval()
    return TrainResult(detector, estimator, config, curves)


def save_checkpoint(result: TrainResult, path: str | Path) -> None:
    torch.save(
        {
            "detector_state": result.detector.state_dict(),
            "estimator_state": result.estimator.state_dict(),
            "config": asdict(result.config),
            "in_dim": len(OPCODE_VOCAB_V1),
            "curves": result.curves,
        },
        path,
    )


def load_checkpoint(path: str | Path) -> TrainResult:
    blob = torch.load(path, weights_only=False)
    config = TrainConfig(**blob["config"])
    detector = Detector(
        in_dim=blob["in_dim"],
        hidden_dim=config.hidden_dim,
        encoder_layers=config.encoder_layers,
        relations=config.relations,
        tau=config.tau,
        rho=config.rho,
    )
    detector.load_state_dict(blob["detector_state"])
    detector.eval()
    estimator = MineEstimator(config.hidden_dim, config.mine_hidden, lipschitz=True)
    estimator.load_state_dict(blob["estimator_state"])
    return TrainResult(detector, estimator, config, blob.get("curves", []))
