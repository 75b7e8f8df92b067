"""Deterministic oracle provider for offline testing.

Stands in for the remote detection/segmentation models: detections are
derived from the ground-truth block masks of the rendered scene, with
configurable confidence jitter, pixel noise, and dropout.  Outputs are a pure
function of (config seed, view, ground truth, masks, labels).
"""

from __future__ import annotations

import zlib
from typing import Optional

import numpy as np

from ..blocks import BlockAssignment
from ..errors import ProviderError
from ..render import BinaryMask
from .base import (
    Detection,
    LabelList,
    OracleConfig,
    Provider,
    SceneContext,
    SegmentMask,
    SynonymMap,
    SynthesisRequest,
)
from .tables import builtin_suggest, fallback_synonyms


def _label_rng(cfg: OracleConfig, view: int, label: str) -> np.random.Generator:
    crc = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, view, crc]))


def oracle_detect(view: int, gt: BlockAssignment, masks: dict[int, BinaryMask],
                  labels: LabelList, cfg: OracleConfig
                  ) -> list[tuple[Detection, SegmentMask]]:
    """One noisy detection per ground-truth label visible in this view."""
    out: list[tuple[Detection, SegmentMask]] = []
    for label in labels.labels:
        member_masks = [
            masks[bid].bits
            for bid, labs in sorted(gt.labels.items())
            if label in labs and bid in masks
        ]
        if not member_masks:
            continue
        clean = np.logical_or.reduce(member_masks)
        if not clean.any():
            continue  # label fully occluded in this view
        rng = _label_rng(cfg, view, label)
        conf = float(rng.uniform(cfg.confidence_range[0], cfg.confidence_range[1]))
        conf += float(rng.normal(0.0, cfg.confidence_jitter)) if cfg.confidence_jitter > 0 else 0.0
        conf = min(max(conf, 0.0), 1.0)
        dropped = bool(rng.random() < cfg.detection_dropout)
        bits = clean
        if cfg.pixel_noise_rate > 0:
            flips = rng.random(clean.shape) < cfg.pixel_noise_rate
            bits = clean ^ flips
        if dropped or not bits.any():
            continue
        mask = BinaryMask(width=bits.shape[1], height=bits.shape[0], bits=bits)
        box = mask.bounding_box()
        detection = Detection(label=label, box=box, confidence=conf)
        out.append((detection, SegmentMask(mask=mask, source_box=box, label=label)))
    return out


class OracleProvider(Provider):
    kind = "oracle"

    def __init__(self, cfg: Optional[OracleConfig] = None):
        self.cfg = cfg or OracleConfig()

    def synthesize(self, req: SynthesisRequest) -> list[bytes]:
        # pass-through: oracle detection reads masks, not pixels
        return [req.depth_image for _ in range(req.n_images)]

    def _pairs(self, labels: LabelList, scene: Optional[SceneContext]
               ) -> list[tuple[Detection, SegmentMask]]:
        if scene is None:
            raise ProviderError(0, "oracle provider requires a scene context")
        return oracle_detect(scene.view, scene.gt, scene.block_masks, labels, self.cfg)

    def detect(self, image: bytes, labels: LabelList,
               scene: Optional[SceneContext] = None) -> list[Detection]:
        return [d for d, _ in self._pairs(labels, scene)]

    def segment(self, image: bytes, box: tuple[int, int, int, int], label: str,
                scene: Optional[SceneContext] = None) -> SegmentMask:
        if scene is None:
            raise ProviderError(0, "oracle provider requires a scene context")
        for det, seg in self._pairs(LabelList(category="", labels=(label,)), scene):
            if det.label == label:
                return seg
        raise ProviderError(0, f"oracle has no segment for label '{label}' in this view")

    def suggest_labels(self, category: str) -> LabelList:
        return builtin_suggest(category)

    def map_synonyms(self, predicted: list[str], ground_truth: list[str]) -> SynonymMap:
        return fallback_synonyms(predicted, ground_truth)
