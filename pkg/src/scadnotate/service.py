"""HTTP service for browsing programs and persisting label edits.

Programs live as .scad files (ground truth in comments) under a data
directory with a manifest.json.  Edits are optimistic: every GET carries a
revision token (content hash) and a POST with a stale token is rejected with
409.  Writes are atomic (temp file + rename) and serialized per program.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, PlainTextResponse, Response

from .blocks import BlockAssignment, extract_blocks, insert_comments, read_ground_truth
from .config import Config
from .errors import ScadnotateError
from .evaluate import expand
from .geometry import Shape
from .nodes import SourceFile
from .parser import parse
from .render import (
    encode_depth_8bit,
    make_view_ring,
    png_from_mask,
    render_all_block_masks,
    render_depth,
)

RENDER_CACHE_DIR = ".renders"
PREVIEW_RESOLUTION = 256


def _revision(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class ProgramStore:
    """Filesystem access to the manifest, programs, and render cache."""

    def __init__(self, data_dir: str | Path, views: int = 10):
        self.root = Path(data_dir)
        self.views = views
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest.json under {self.root}")
        self.manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        self.by_id = {e["id"]: e for e in self.manifest["entries"]}

    def lock(self, program_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(program_id, threading.Lock())

    def path(self, program_id: str) -> Path:
        entry = self.by_id.get(program_id)
        if entry is None:
            raise KeyError(program_id)
        return self.root / entry["path"]

    def read(self, program_id: str) -> SourceFile:
        return SourceFile.from_text(self.path(program_id).read_text(encoding="utf-8"),
                                    str(self.path(program_id)))

    def write_atomic(self, program_id: str, text: str) -> None:
        target = self.path(program_id)
        fd, tmp = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, target)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    def render_dir(self, program_id: str) -> Path:
        return self.root / RENDER_CACHE_DIR / program_id


def _program_view(store: ProgramStore, program_id: str) -> dict:
    source = store.read(program_id)
    tree = parse(source)
    blocks = extract_blocks(expand(tree))
    gt = read_ground_truth(source, blocks)
    entry = store.by_id[program_id]
    renders = []
    for v in range(store.views):
        renders.append(
            {
                "view": v,
                "depth_url": f"/api/programs/{program_id}/renders/depth_{v}.png",
                "masks": {
                    str(b.id): f"/api/programs/{program_id}/renders/mask_{v}_{b.id}.png"
                    for b in blocks.in_source_order()
                },
            }
        )
    return {
        "id": program_id,
        "source": source.text,
        "category": entry.get("category", ""),
        "label_set": entry.get("labels", []),
        "blocks": [
            {
                "id": b.id,
                "kind": b.kind,
                "span": list(b.span),
                "parent": b.parent,
                "children": list(b.children),
                "labels": gt.labels.get(b.id, []),
            }
            for b in blocks.in_source_order()
        ],
        "renders": renders,
        "revision": _revision(source.text),
    }


def _ensure_renders(store: ProgramStore, program_id: str) -> Path:
    """Render depth + mask previews once per program revision."""
    with store.lock(program_id):  # serialized with label writes and other renders
        source = store.read(program_id)
        out = store.render_dir(program_id)
        stamp = out / f"revision-{_revision(source.text)}"
        if stamp.exists():
            return out
        out.mkdir(parents=True, exist_ok=True)
        for old in out.glob("*"):
            old.unlink()
        tree = expand(parse(source))
        blocks = extract_blocks(tree)
        shape = Shape(tree, blocks)
        ring = make_view_ring(shape.bounds(), n=store.views, resolution=PREVIEW_RESOLUTION)
        for v, cam in enumerate(ring.cameras):
            depth = render_depth(shape, cam)
            (out / f"depth_{v}.png").write_bytes(encode_depth_8bit(depth))
            for bid, mask in render_all_block_masks(shape, cam, depth).items():
                (out / f"mask_{v}_{bid}.png").write_bytes(png_from_mask(mask))
        stamp.touch()
        return out


def create_app(config: Optional[Config] = None, data_dir: Optional[str] = None,
               static_dir: Optional[str] = None) -> FastAPI:
    config = config or Config()
    store = ProgramStore(data_dir or config.service.data_dir, views=config.render.views)
    app = FastAPI(title="scadnotate review service")

    @app.get("/api/programs")
    def list_programs() -> list[dict]:
        out = []
        for entry in store.manifest["entries"]:
            source = store.read(entry["id"])
            blocks = extract_blocks(expand(parse(source)))
            gt = read_ground_truth(source, blocks)
            labeled = sum(1 for b in blocks.in_source_order() if gt.labels.get(b.id))
            out.append(
                {
                    "id": entry["id"],
                    "track": entry.get("track", ""),
                    "category": entry.get("category", ""),
                    "blocks": len(blocks.blocks),
                    "labeled_blocks": labeled,
                    "status": "labeled" if labeled == len(blocks.blocks) else "partial",
                }
            )
        return out

    @app.get("/api/programs/{program_id}")
    def get_program(program_id: str) -> dict:
        try:
            return _program_view(store, program_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown program {program_id!r}")

    @app.post("/api/programs/{program_id}/labels")
    def post_labels(program_id: str, payload: dict) -> dict:
        try:
            store.path(program_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown program {program_id!r}")
        revision = payload.get("revision")
        edits = payload.get("labels")
        if not isinstance(revision, str) or not isinstance(edits, dict) or not edits:
            raise HTTPException(status_code=422, detail="payload needs revision and labels")
        with store.lock(program_id):
            source = store.read(program_id)
            if _revision(source.text) != revision:
                raise HTTPException(status_code=409, detail="stale revision token")
            blocks = extract_blocks(expand(parse(source)))
            gt = read_ground_truth(source, blocks)
            known = set(blocks.blocks)
            assignment = BlockAssignment()
            for b in blocks.in_source_order():
                assignment.labels[b.id] = list(gt.labels.get(b.id, []))
            for key, labels in edits.items():
                try:
                    bid = int(key)
                except ValueError:
                    raise HTTPException(status_code=422, detail=f"bad block id {key!r}")
                if bid not in known:
                    raise HTTPException(status_code=422, detail=f"unknown block {bid}")
                if not isinstance(labels, list) or not all(
                    isinstance(s, str) and s.strip() for s in labels
                ):
                    raise HTTPException(status_code=422,
                                        detail=f"labels for block {bid} must be non-empty strings")
                if any("," in s or "\n" in s or "//" in s for s in labels):
                    raise HTTPException(status_code=422,
                                        detail=f"labels for block {bid} contain reserved characters")
                assignment.labels[bid] = [s.strip().lower() for s in labels]
            try:
                updated = insert_comments(source, blocks, assignment)
            except ScadnotateError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            store.write_atomic(program_id, updated.text)
        return {"source": updated.text, "revision": _revision(updated.text)}

    @app.get("/api/programs/{program_id}/renders/{name}")
    def get_render(program_id: str, name: str) -> Response:
        try:
            store.path(program_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown program {program_id!r}")
        if "/" in name or ".." in name or not name.endswith(".png"):
            raise HTTPException(status_code=404, detail="unknown render")
        out = _ensure_renders(store, program_id)
        target = out / name
        if not target.exists():
            raise HTTPException(status_code=404, detail="unknown render")
        return FileResponse(target, media_type="image/png")

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/static", StaticFiles(directory=static_dir, html=True), name="static")
    else:
        @app.get("/static/{path:path}")
        def static_placeholder(path: str) -> PlainTextResponse:
            return PlainTextResponse(
                "UI bundle not built; see frontend/README.md", status_code=404
            )

    return app
