"""Detection and explanation metrics.

Precision/recall/F1 score the positive class. Sufficiency (PS) is the
fraction of graphs whose factual subgraph alone reproduces the graph
prediction; necessity (PN) is the fraction whose counterfactual remainder
flips it. Average size counts factual edges.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .data import GraphData
from .model import Detector, Explanation

log = logging.getLogger(__name__)


@dataclass
class Evaluation:
    precision: float
    recall: float
    f1: float
    pn: float
    ps: float
    avg_size: float

    def to_obj(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "pn": self.pn,
            "ps": self.ps,
            "avg_size": self.avg_size,
        }


def prf1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall) if precision + recall else 0.0
    )
    return precision, recall, f1


def evaluate(
    detector: Detector, graphs: Sequence[GraphData]
) -> tuple[Evaluation, list[tuple[GraphData, int, Explanation]]]:
    """Score a labeled set; also returns per-graph predictions and
    explanations for downstream export.

    PN, PS, and average size are taken over the positively-labeled graphs,
    the instances whose explanations the necessity/sufficiency notions are
    defined for (a benign remainder has no prediction to flip).
    """
    detector.eval()
    tp = fp = fn = 0
    preserved = flipped = 0
    sizes: list[int] = []
    rows: list[tuple[GraphData, int, Explanation]] = []
    n_pos = 0
    for g in graphs:
        label_hat, p_g, expl = detector.predict_explain(g)
        rows.append((g, label_hat, expl))
        if g.label == 1:
            n_pos += 1
            pred_g = p_g > 0.5
            preserved += (expl.p_s > 0.5) == pred_g
            flipped += (expl.p_r > 0.5) != pred_g
            sizes.append(len(expl.factual_edges))
            tp += label_hat == 1
            fn += label_hat == 0
        elif g.label == 0:
            fp += label_hat == 1
    if n_pos == 0:
        log.warning("no positive labels in the evaluation set; scores are 0")
        precision = recall = f1 = 0.0
    else:
        precision, recall, f1 = prf1(tp, fp, fn)
    return (
        Evaluation(
            precision=precision,
            recall=recall,
            f1=f1,
            pn=flipped / n_pos if n_pos else 0.0,
            ps=preserved / n_pos if n_pos else 0.0,
            avg_size=sum(sizes) / len(sizes) if sizes else 0.0,
        ),
        rows,
    )
