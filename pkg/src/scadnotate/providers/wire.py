"""JSON wire codecs for the five provider endpoints.

All binary payloads travel base64-encoded; encoding is canonical (sorted
keys, compact separators) so identical messages are byte-identical, which the
golden-file tests rely on.
"""

from __future__ import annotations

import base64
import json
from typing import Any

from ..render import BinaryMask, mask_from_png, png_from_mask
from .base import Detection, LabelList, SegmentMask, SynonymMap, SynthesisRequest

ENDPOINTS = ("/synthesize", "/detect", "/segment", "/suggest_labels", "/map_synonyms")


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


# --- /synthesize ---


def synthesize_request_obj(req: SynthesisRequest) -> dict:
    return {
        "depth_png": _b64(req.depth_image),
        "prompt": req.prompt,
        "n_images": req.n_images,
        "seeds": list(req.seeds),
        "control_strength": req.control_strength,
        "steps": req.steps,
        "resolution": req.resolution,
    }


def synthesize_request_from_obj(obj: dict) -> SynthesisRequest:
    return SynthesisRequest(
        depth_image=_unb64(obj["depth_png"]),
        prompt=obj["prompt"],
        n_images=obj["n_images"],
        seeds=tuple(obj["seeds"]),
        control_strength=obj["control_strength"],
        steps=obj["steps"],
        resolution=obj["resolution"],
    )


def synthesize_response_obj(images: list[bytes]) -> dict:
    return {"images": [_b64(i) for i in images]}


def synthesize_response_from_obj(obj: dict) -> list[bytes]:
    return [_unb64(i) for i in obj["images"]]


# --- /detect ---


def detect_request_obj(image: bytes, labels: LabelList) -> dict:
    return {"image_png": _b64(image), "labels": list(labels.labels)}


def detect_request_from_obj(obj: dict) -> tuple[bytes, list[str]]:
    return _unb64(obj["image_png"]), list(obj["labels"])


def detect_response_obj(detections: list[Detection]) -> dict:
    return {
        "detections": [
            {"label": d.label, "box": list(d.box), "confidence": d.confidence}
            for d in detections
        ]
    }


def detect_response_from_obj(obj: dict) -> list[Detection]:
    out = []
    for item in obj["detections"]:
        box = tuple(int(round(float(v))) for v in item["box"])
        out.append(Detection(label=item["label"], box=box,
                             confidence=float(item["confidence"])))
    return out


# --- /segment ---


def segment_request_obj(image: bytes, box: tuple[int, int, int, int], label: str) -> dict:
    return {"image_png": _b64(image), "box": list(box), "label": label}


def segment_request_from_obj(obj: dict) -> tuple[bytes, tuple[int, int, int, int], str]:
    box = tuple(int(round(float(v))) for v in obj["box"])
    return _unb64(obj["image_png"]), box, obj["label"]


def segment_response_obj(mask: SegmentMask) -> dict:
    return {"mask_png": _b64(png_from_mask(mask.mask))}


def segment_response_from_obj(obj: dict, box: tuple[int, int, int, int],
                              label: str) -> SegmentMask:
    mask = mask_from_png(_unb64(obj["mask_png"]))
    return SegmentMask(mask=mask, source_box=box, label=label)


# --- /suggest_labels ---


def suggest_request_obj(category: str) -> dict:
    return {"category": category}


def suggest_response_obj(labels: LabelList) -> dict:
    return {"labels": list(labels.labels)}


def suggest_response_from_obj(obj: dict, category: str) -> LabelList:
    return LabelList(category=category, labels=tuple(obj["labels"]))


# --- /map_synonyms ---


def synonyms_request_obj(predicted: list[str], ground_truth: list[str]) -> dict:
    return {"predicted": list(predicted), "ground_truth": list(ground_truth)}


def synonyms_response_obj(mapping: SynonymMap) -> dict:
    return {"mapping": dict(mapping.mapping)}


def synonyms_response_from_obj(obj: dict) -> SynonymMap:
    return SynonymMap(mapping={k: v for k, v in obj["mapping"].items()})


def mask_to_rle_obj(mask: BinaryMask) -> dict:
    """Run-length JSON alternative for debugging dumps; runs start with a 0-bit run."""
    import numpy as np

    flat = mask.bits.reshape(-1)
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    runs = np.diff(bounds).astype(int).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return {"width": mask.width, "height": mask.height, "runs": runs}
