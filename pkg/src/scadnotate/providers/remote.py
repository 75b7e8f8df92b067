"""HTTP client for remote vision providers.

All five endpoints are POST with canonical-JSON bodies.  At most
`max_inflight` requests run concurrently; label suggestion and synonym
mapping go to the configured LLM endpoint when present and otherwise fall
back to the built-in tables.
"""

from __future__ import annotations

import logging
import threading
from typing import Optional

import httpx

from ..errors import BadImage, ProviderError, ProviderUnreachable
from . import wire
from .base import (
    Detection,
    LabelList,
    Provider,
    SceneContext,
    SegmentMask,
    SynonymMap,
    SynthesisRequest,
)
from .tables import builtin_suggest, fallback_synonyms

log = logging.getLogger("scadnotate.providers")

DEFAULT_TIMEOUT_S = 120.0
MAX_INFLIGHT = 4


class RemoteProvider(Provider):
    kind = "remote"

    def __init__(self, url: str, llm_url: Optional[str] = None,
                 timeout_s: float = DEFAULT_TIMEOUT_S, max_inflight: int = MAX_INFLIGHT):
        self.url = url.rstrip("/")
        self.llm_url = llm_url.rstrip("/") if llm_url else None
        self._client = httpx.Client(timeout=timeout_s)
        self._gate = threading.Semaphore(max_inflight)

    def close(self) -> None:
        self._client.close()

    def _post(self, base: str, path: str, payload: dict) -> dict:
        body = wire.canonical_json(payload)
        try:
            with self._gate:
                resp = self._client.post(
                    base + path, content=body,
                    headers={"content-type": "application/json"},
                )
        except httpx.HTTPError as exc:
            raise ProviderUnreachable(f"POST {base}{path}: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(resp.status_code, resp.text)
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError(resp.status_code, f"non-JSON response: {exc}") from exc

    def synthesize(self, req: SynthesisRequest) -> list[bytes]:
        obj = self._post(self.url, "/synthesize", wire.synthesize_request_obj(req))
        images = wire.synthesize_response_from_obj(obj)
        if len(images) != req.n_images:
            raise ProviderError(200, f"expected {req.n_images} images, got {len(images)}")
        for img in images:
            _require_png(img)
        return images

    def detect(self, image: bytes, labels: LabelList,
               scene: Optional[SceneContext] = None) -> list[Detection]:
        obj = self._post(self.url, "/detect", wire.detect_request_obj(image, labels))
        detections = wire.detect_response_from_obj(obj)
        out = []
        for d in detections:
            conf = d.confidence
            if not (0.0 <= conf <= 1.0):
                log.warning("clamping out-of-range confidence %.4f for label %r",
                            conf, d.label)
                conf = min(max(conf, 0.0), 1.0)
                d = Detection(label=d.label, box=d.box, confidence=conf)
            out.append(d)
        return out

    def segment(self, image: bytes, box: tuple[int, int, int, int], label: str,
                scene: Optional[SceneContext] = None) -> SegmentMask:
        obj = self._post(self.url, "/segment", wire.segment_request_obj(image, box, label))
        try:
            return wire.segment_response_from_obj(obj, box, label)
        except Exception as exc:
            raise BadImage(f"undecodable segment mask: {exc}") from exc

    def suggest_labels(self, category: str) -> LabelList:
        if self.llm_url is None:
            return builtin_suggest(category)
        obj = self._post(self.llm_url, "/suggest_labels", wire.suggest_request_obj(category))
        return wire.suggest_response_from_obj(obj, category)

    def map_synonyms(self, predicted: list[str], ground_truth: list[str]) -> SynonymMap:
        if self.llm_url is None:
            return fallback_synonyms(predicted, ground_truth)
        obj = self._post(self.llm_url, "/map_synonyms",
                         wire.synonyms_request_obj(predicted, ground_truth))
        return wire.synonyms_response_from_obj(obj)


def _require_png(data: bytes) -> None:
    if not data.startswith(b"\x89PNG\r\n\x1a\n"):
        raise BadImage("response image is not a PNG")
