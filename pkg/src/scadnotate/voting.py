"""Per-image confidence scoring and the three-stage label vote.

Image score: detector confidence times IoU between the block's mask and the
detected segment.  Scores are summed over the images of a view, then over all
views, with sub-threshold entries zeroed after each stage; every block gets
the label with the highest surviving total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import UNLABELED, BlockAssignment
from .errors import DimensionMismatchError, ShapeMismatchError
from .providers.base import Detection, LabelList, SegmentMask
from .render import BinaryMask, mask_iou


@dataclass(frozen=True)
class VoteConfig:
    t_image: float = 0.001
    t_view: float = 0.01
    t_shape: float = 0.02
    images_per_view: int = 4
    views: int = 10
    tie_break: str = "lexicographic"
    segment_merge: str = "best"  # best box per label, or union of same-label boxes

    def __post_init__(self):
        if min(self.t_image, self.t_view, self.t_shape) < 0:
            raise ValueError("thresholds must be non-negative")
        if self.segment_merge not in ("best", "union"):
            raise ValueError("segment_merge must be 'best' or 'union'")


@dataclass
class ConfidenceMatrix:
    blocks: tuple[int, ...]
    labels: tuple[str, ...]
    values: np.ndarray  # [n_blocks, n_labels], finite, >= 0

    @staticmethod
    def zeros(blocks, labels) -> "ConfidenceMatrix":
        return ConfidenceMatrix(tuple(blocks), tuple(labels),
                                np.zeros((len(blocks), len(labels))))

    def entry(self, block_id: int, label: str) -> float:
        return float(self.values[self.blocks.index(block_id), self.labels.index(label)])

    def _require_same_axes(self, other: "ConfidenceMatrix") -> None:
        if self.blocks != other.blocks or self.labels != other.labels:
            raise ShapeMismatchError("confidence matrices have different axes")


def _threshold(values: np.ndarray, cutoff: float) -> np.ndarray:
    out = values.copy()
    out[out < cutoff] = 0.0
    return out


def _select_segments(dets: list[tuple[Detection, SegmentMask]], labels: tuple[str, ...],
                     merge: str) -> dict[str, tuple[float, np.ndarray]]:
    """Per label: (confidence, segment bits) per the configured merge rule."""
    chosen: dict[str, tuple[float, np.ndarray]] = {}
    for label in labels:
        group = [(d, s) for d, s in dets if d.label == label]
        if not group:
            continue
        if merge == "union":
            bits = np.logical_or.reduce([s.mask.bits for _, s in group])
            conf = max(d.confidence for d, _ in group)
        else:
            # highest confidence wins; ties prefer the larger mask, then first
            best_key = None
            best = None
            for i, (d, s) in enumerate(group):
                key = (d.confidence, s.mask.count(), -i)
                if best_key is None or key > best_key:
                    best_key = key
                    best = (d, s)
            conf = best[0].confidence
            bits = best[1].mask.bits
        chosen[label] = (conf, bits)
    return chosen


def score_image(dets: list[tuple[Detection, SegmentMask]],
                block_masks: dict[int, BinaryMask],
                labels: LabelList,
                blocks: tuple[int, ...],
                cfg: VoteConfig = VoteConfig()) -> ConfidenceMatrix:
    """Confidence(label in image) x IoU(block mask, segment) for one image."""
    shapes = {m.bits.shape for m in block_masks.values()}
    shapes.update(s.mask.bits.shape for _, s in dets)
    if len(shapes) > 1:
        raise DimensionMismatchError(f"mask dimensions differ: {sorted(shapes)}")
    matrix = ConfidenceMatrix.zeros(blocks, labels.labels)
    chosen = _select_segments(dets, labels.labels, cfg.segment_merge)
    for j, label in enumerate(labels.labels):
        if label not in chosen:
            continue  # zero column for undetected labels
        conf, seg_bits = chosen[label]
        seg = BinaryMask(width=seg_bits.shape[1], height=seg_bits.shape[0], bits=seg_bits)
        for i, bid in enumerate(blocks):
            matrix.values[i, j] = conf * mask_iou(block_masks[bid], seg)
    matrix.values = _threshold(matrix.values, cfg.t_image)
    return matrix


def _aggregate(matrices: list[ConfidenceMatrix], cutoff: float) -> ConfidenceMatrix:
    if not matrices:
        raise ShapeMismatchError("nothing to aggregate")
    first = matrices[0]
    total = np.zeros_like(first.values)
    for m in matrices:  # fixed order: results independent of scheduling
        first._require_same_axes(m)
        total += m.values
    return ConfidenceMatrix(first.blocks, first.labels, _threshold(total, cutoff))


def aggregate_view(image_matrices: list[ConfidenceMatrix],
                   cfg: VoteConfig = VoteConfig()) -> ConfidenceMatrix:
    """Sum the per-image scores of one view; zero entries below t_view."""
    return _aggregate(image_matrices, cfg.t_view)


def aggregate_shape(view_matrices: list[ConfidenceMatrix],
                    cfg: VoteConfig = VoteConfig()) -> ConfidenceMatrix:
    """Sum the per-view scores of the shape; zero entries below t_shape."""
    return _aggregate(view_matrices, cfg.t_shape)


def assign_labels(matrix: ConfidenceMatrix, cfg: VoteConfig = VoteConfig(),
                  warnings: list[str] | None = None) -> BlockAssignment:
    """Argmax label per block; exact ties pick the lexicographically smallest."""
    assignment = BlockAssignment()
    for i, bid in enumerate(matrix.blocks):
        row = matrix.values[i]
        top = float(row.max(initial=0.0))
        if top <= 0.0:
            assignment.labels[bid] = [UNLABELED]
            assignment.scores[bid] = 0.0
            continue
        winners = [matrix.labels[j] for j in np.nonzero(row == top)[0]]
        if len(winners) > 1 and warnings is not None:
            warnings.append(
                f"block {bid}: tie between {sorted(winners)} at {top:.6g}; "
                "picked lexicographically smallest"
            )
        assignment.labels[bid] = [min(winners)]
        assignment.scores[bid] = top
    return assignment


@dataclass
class ScoreBreakdown:
    """Per-block score vectors retained for the run report."""

    matrix: ConfidenceMatrix
    assignment: BlockAssignment
    ties: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for i, bid in enumerate(self.matrix.blocks):
            out.append(
                {
                    "id": bid,
                    "label": self.assignment.labels[bid][0],
                    "score": self.assignment.scores[bid],
                    "scores_by_label": {
                        lab: float(self.matrix.values[i, j])
                        for j, lab in enumerate(self.matrix.labels)
                    },
                }
            )
        return out
