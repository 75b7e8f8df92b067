"""Evaluation metrics: block accuracy and semantic IoU, with synonym mapping.

Block accuracy is the fraction of ground-truth-labeled blocks whose predicted
label appears in the block's ground-truth label set (multi-label ground truth
counts any of its labels as correct).  Semantic IoU averages, over the
distinct ground-truth labels, the IoU between the predicted and ground-truth
block sets of each label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .blocks import UNLABELED, BlockAssignment
from .errors import NoGroundTruthError
from .providers.base import SynonymMap


@dataclass
class MetricsReport:
    b_acc: float
    s_iou: float
    per_label_iou: dict[str, float]
    n_blocks: int
    m_correct: int
    confusion: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "b_acc": self.b_acc,
            "s_iou": self.s_iou,
            "per_label_iou": dict(sorted(self.per_label_iou.items())),
            "n_blocks": self.n_blocks,
            "m_correct": self.m_correct,
            "confusion": {k: dict(sorted(v.items())) for k, v in sorted(self.confusion.items())},
        }


def _predicted_label(pred: BlockAssignment, block_id: int) -> str:
    labels = pred.labels.get(block_id) or [UNLABELED]
    return labels[0]


def _gt_block_ids(gt: BlockAssignment) -> list[int]:
    ids = sorted(bid for bid, labels in gt.labels.items() if labels)
    if not ids:
        raise NoGroundTruthError("no block carries a ground-truth label")
    return ids


def block_accuracy(pred: BlockAssignment, gt: BlockAssignment) -> tuple[float, int, int]:
    """(accuracy, correct count, labeled-block count)."""
    ids = _gt_block_ids(gt)
    m = sum(1 for bid in ids if _predicted_label(pred, bid) in gt.labels[bid])
    return m / len(ids), m, len(ids)


def semantic_iou(pred: BlockAssignment, gt: BlockAssignment) -> tuple[float, dict[str, float]]:
    """Mean per-label IoU of predicted vs ground-truth block sets."""
    ids = _gt_block_ids(gt)
    gt_labels = sorted({lab for bid in ids for lab in gt.labels[bid]})
    per_label: dict[str, float] = {}
    for label in gt_labels:
        predicted_set = {bid for bid in ids if _predicted_label(pred, bid) == label}
        gt_set = {bid for bid in ids if label in gt.labels[bid]}
        union = predicted_set | gt_set
        per_label[label] = len(predicted_set & gt_set) / len(union) if union else 0.0
    return sum(per_label.values()) / len(gt_labels), per_label


def apply_synonyms(pred: BlockAssignment, mapping: SynonymMap) -> BlockAssignment:
    """Rewrite predicted labels through the synonym map (unmapped pass through)."""
    out = BlockAssignment()
    for bid, labels in pred.labels.items():
        out.labels[bid] = [mapping.apply(lab) for lab in labels]
    out.scores = dict(pred.scores)
    return out


def confusion_counts(pred: BlockAssignment, gt: BlockAssignment) -> dict[str, dict[str, int]]:
    grid: dict[str, dict[str, int]] = {}
    for bid in _gt_block_ids(gt):
        p = _predicted_label(pred, bid)
        for g in gt.labels[bid]:
            grid.setdefault(p, {})
            grid[p][g] = grid[p].get(g, 0) + 1
    return grid


def evaluate(pred: BlockAssignment, gt: BlockAssignment,
             synonyms: SynonymMap | None = None) -> MetricsReport:
    if synonyms is not None:
        pred = apply_synonyms(pred, synonyms)
    b_acc, m, n = block_accuracy(pred, gt)
    s_iou, per_label = semantic_iou(pred, gt)
    return MetricsReport(
        b_acc=b_acc,
        s_iou=s_iou,
        per_label_iou=per_label,
        n_blocks=n,
        m_correct=m,
        confusion=confusion_counts(pred, gt),
    )
