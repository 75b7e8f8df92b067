#!/usr/bin/env python3
"""Regenerate the wire-protocol golden fixtures under tests/goldens/.

Runs the commenting pipeline once with the oracle provider wrapped in a
recorder that captures every request/response pair in canonical wire JSON,
then adds hand-frozen fixtures for the two language-model endpoints.
Rerun after any change that affects rendering or wire encoding.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from conftest import airplane_records  # noqa: E402

from scadnotate.config import Config, RenderSettings, VoteConfig  # noqa: E402
from scadnotate.dataset import build_entry, record_from_obj  # noqa: E402
from scadnotate.pipeline import comment_pipeline  # noqa: E402
from scadnotate.providers import LabelList, OracleProvider, wire  # noqa: E402

GOLDEN_DIR = ROOT / "tests" / "goldens"

FIXTURE_CONFIG = Config(
    render=RenderSettings(views=4, resolution=64, closing_iterations=1),
    vote=VoteConfig(images_per_view=2),
)


class RecordingProvider(OracleProvider):
    """Oracle provider that records remote-protocol request/response pairs."""

    def __init__(self):
        super().__init__()
        self.pairs: list[dict] = []
        self._seen: set[tuple[str, bytes]] = set()

    def _record(self, endpoint: str, request_obj, response_obj) -> None:
        req = wire.canonical_json(request_obj)
        if (endpoint, req) in self._seen:
            return
        self._seen.add((endpoint, req))
        self.pairs.append(
            {
                "endpoint": endpoint,
                "request": req.decode("utf-8"),
                "response": wire.canonical_json(response_obj).decode("utf-8"),
            }
        )

    def synthesize(self, req):
        images = super().synthesize(req)
        self._record("/synthesize", wire.synthesize_request_obj(req),
                     wire.synthesize_response_obj(images))
        return images

    def detect(self, image, labels, scene=None):
        detections = super().detect(image, labels, scene)
        self._record("/detect", wire.detect_request_obj(image, labels),
                     wire.detect_response_obj(detections))
        return detections

    def segment(self, image, box, label, scene=None):
        seg = super().segment(image, box, label, scene)
        self._record("/segment", wire.segment_request_obj(image, box, label),
                     wire.segment_response_obj(seg))
        return seg

    def suggest_labels(self, category):
        labels = super().suggest_labels(category)
        self._record("/suggest_labels", wire.suggest_request_obj(category),
                     wire.suggest_response_obj(labels))
        return labels


def main() -> None:
    records = [record_from_obj(i, r) for i, r in enumerate(airplane_records(seed=0))]
    label_set = LabelList(category="airplane",
                          labels=("body", "wings", "tail", "engine"))
    entry, _ = build_entry("golden0", "CubeL", "airplane", records, label_set)

    provider = RecordingProvider()
    commented, report = comment_pipeline(entry.program, "airplane", provider,
                                         FIXTURE_CONFIG, workers=1)

    # hand-frozen language-model fixtures (one recorded mapping call)
    provider._record(
        "/map_synonyms",
        wire.synonyms_request_obj(["fuselage", "wings"],
                                  ["body", "wings", "tail", "engine"]),
        {"mapping": {"fuselage": "body", "wings": "wings"}},
    )

    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    (GOLDEN_DIR / "provider_goldens.json").write_text(
        json.dumps(provider.pairs, indent=1), encoding="utf-8")
    meta = {
        "program": entry.program.text,
        "category": "airplane",
        "expected_commented": commented.text,
        "config": {
            "views": FIXTURE_CONFIG.render.views,
            "resolution": FIXTURE_CONFIG.render.resolution,
            "closing_iterations": FIXTURE_CONFIG.render.closing_iterations,
            "images_per_view": FIXTURE_CONFIG.vote.images_per_view,
        },
    }
    (GOLDEN_DIR / "goldens_meta.json").write_text(
        json.dumps(meta, indent=1), encoding="utf-8")
    print(f"{len(provider.pairs)} golden pairs written to {GOLDEN_DIR}")


if __name__ == "__main__":
    main()
