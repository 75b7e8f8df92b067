"""Benchmark-side machinery: primitive translation, label transfer, manifests.

Machine-made programs are one top-level union of cuboids or ellipsoids, one
primitive per line (so line counts are constant for a fixed record count);
ground truth is carried as comment lines above each block.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .blocks import BlockAssignment, BlockSet, extract_blocks, insert_comments
from .errors import DuplicateIdError, EmptyCloudError, InvalidPrimitiveError
from .evaluate import expand
from .geometry import Shape
from .nodes import SourceFile
from .parser import parse
from .printer import format_number
from .providers.base import LabelList

TRACKS = ("CubeL", "CubeH", "EllipL", "EllipH", "Real")
SHARE_THRESHOLD = 0.2
MATCH_EPS_FACTOR = 1e-3


@dataclass(frozen=True)
class PrimitiveRecord:
    kind: str  # "cuboid" | "ellipsoid"
    size: tuple[float, float, float]  # w,h,l for cuboids; semi-axes for ellipsoids
    rotation_euler_deg: Optional[tuple[float, float, float]] = None
    rotation_matrix: Optional[tuple[float, ...]] = None  # row-major 9 entries
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gt_labels: tuple[str, ...] = ()


def _validate_record(i: int, rec: PrimitiveRecord) -> None:
    if rec.kind not in ("cuboid", "ellipsoid"):
        raise InvalidPrimitiveError(i, f"unknown kind '{rec.kind}'")
    if any(s <= 0 for s in rec.size):
        raise InvalidPrimitiveError(i, "sizes/semi-axes must be positive")
    if rec.rotation_matrix is not None:
        m = np.asarray(rec.rotation_matrix, dtype=float).reshape(3, 3)
        if not np.allclose(m @ m.T, np.eye(3), atol=1e-6):
            raise InvalidPrimitiveError(i, "rotation matrix is not orthonormal")


def record_from_obj(i: int, obj: dict) -> PrimitiveRecord:
    kind = obj.get("kind", "")
    size = obj.get("size") if kind == "cuboid" else obj.get("semi_axes")
    if size is None or len(size) != 3:
        raise InvalidPrimitiveError(i, "missing size/semi_axes triple")
    rotation = obj.get("rotation", {})
    euler = rotation.get("euler_deg")
    matrix = rotation.get("matrix")
    if matrix is not None and len(matrix) != 9:
        raise InvalidPrimitiveError(i, "rotation matrix must have 9 entries")
    rec = PrimitiveRecord(
        kind=kind,
        size=tuple(float(v) for v in size),
        rotation_euler_deg=tuple(euler) if euler is not None else None,
        rotation_matrix=tuple(matrix) if matrix is not None else None,
        translation=tuple(obj.get("translation", (0.0, 0.0, 0.0))),
        gt_labels=tuple(str(s).lower() for s in obj.get("gt_labels", ())),
    )
    _validate_record(i, rec)
    return rec


def records_from_json(text: str) -> list[PrimitiveRecord]:
    obj = json.loads(text)
    return [record_from_obj(i, rec) for i, rec in enumerate(obj["records"])]


def _vec(v) -> str:
    return "[" + ", ".join(format_number(float(x)) for x in v) + "]"


def _rotation_text(rec: PrimitiveRecord) -> str:
    if rec.rotation_matrix is not None:
        m = rec.rotation_matrix
        rows = [
            f"[{format_number(m[0])}, {format_number(m[1])}, {format_number(m[2])}, 0]",
            f"[{format_number(m[3])}, {format_number(m[4])}, {format_number(m[5])}, 0]",
            f"[{format_number(m[6])}, {format_number(m[7])}, {format_number(m[8])}, 0]",
            "[0, 0, 0, 1]",
        ]
        return f"multmatrix([{', '.join(rows)}])"
    euler = rec.rotation_euler_deg or (0.0, 0.0, 0.0)
    return f"rotate({_vec(euler)})"


def translate_primitives(records: list[PrimitiveRecord],
                         path: str = "<generated>") -> tuple[SourceFile, list[dict]]:
    """Emit one top-level union with one primitive statement per record.

    Returns the program and a sidecar list mapping record index -> line span.
    """
    for i, rec in enumerate(records):
        _validate_record(i, rec)
    lines = ["union() {"]
    sidecar = []
    for i, rec in enumerate(records):
        prefix = f"translate({_vec(rec.translation)}) {_rotation_text(rec)}"
        if rec.kind == "cuboid":
            stmt = f"{prefix} cube({_vec(rec.size)}, center=true);"
        else:
            stmt = f"{prefix} scale({_vec(rec.size)}) sphere(r=1);"
        lines.append("    " + stmt)
        sidecar.append({"record": i, "span": [len(lines), len(lines)]})
    lines.append("}")
    return SourceFile.from_text("\n".join(lines) + "\n", path), sidecar


@dataclass
class LabeledPointCloud:
    points: np.ndarray  # [N,3] float64
    labels: list[str]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.points.shape[0] == 0:
            raise EmptyCloudError("point cloud has no points")
        if self.points.shape[0] != len(self.labels):
            raise ValueError("points and labels must have equal length")


def cloud_from_json(text: str) -> LabeledPointCloud:
    obj = json.loads(text)
    return LabeledPointCloud(points=np.asarray(obj["points"], dtype=float),
                             labels=[str(s).lower() for s in obj["labels"]])


def cloud_to_json(cloud: LabeledPointCloud) -> str:
    return json.dumps(
        {"points": [[float(c) for c in p] for p in cloud.points],
         "labels": list(cloud.labels)},
        sort_keys=True,
    )


def cloud_from_ply(text: str) -> LabeledPointCloud:
    """PLY-ASCII with per-vertex x y z label_index and a comment label table."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError("not a PLY file")
    table: dict[int, str] = {}
    n_vertices = 0
    body_at = 0
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "comment" and len(parts) >= 4 and parts[1] == "label":
            table[int(parts[2])] = " ".join(parts[3:]).lower()
        elif parts[0] == "element" and parts[1] == "vertex":
            n_vertices = int(parts[2])
        elif parts[0] == "end_header":
            body_at = i + 1
            break
    pts = []
    labels = []
    for line in lines[body_at : body_at + n_vertices]:
        x, y, z, idx = line.split()[:4]
        pts.append((float(x), float(y), float(z)))
        labels.append(table[int(idx)])
    return LabeledPointCloud(points=np.asarray(pts), labels=labels)


def cloud_to_ply(cloud: LabeledPointCloud) -> str:
    names = sorted(set(cloud.labels))
    index = {name: i for i, name in enumerate(names)}
    head = ["ply", "format ascii 1.0"]
    head += [f"comment label {i} {name}" for i, name in enumerate(names)]
    head += [
        f"element vertex {len(cloud.labels)}",
        "property float x",
        "property float y",
        "property float z",
        "property int label_index",
        "end_header",
    ]
    body = [
        f"{p[0]} {p[1]} {p[2]} {index[lab]}"
        for p, lab in zip(cloud.points, cloud.labels)
    ]
    return "\n".join(head + body) + "\n"


def transfer_labels(blocks: BlockSet, shape: Shape, cloud: LabeledPointCloud,
                    tau: float = SHARE_THRESHOLD,
                    warnings: Optional[list[str]] = None) -> BlockAssignment:
    """Vote each block's labels from the cloud points its geometry contains.

    Labels with vote share >= tau are kept in descending-share order; a block
    matching no point falls back to the nearest point's label with a warning.
    """
    eps = MATCH_EPS_FACTOR * shape.diag
    assignment = BlockAssignment()
    for block in blocks.in_source_order():
        inside = shape.contains_block(block.id, cloud.points, eps=eps)
        count = int(np.count_nonzero(inside))
        if count == 0:
            box = shape.bounds(block.ast_node)
            lo = np.asarray(box.lo)
            hi = np.asarray(box.hi)
            delta = np.maximum(np.maximum(lo - cloud.points, cloud.points - hi), 0.0)
            dist = np.einsum("ij,ij->i", delta, delta)
            nearest = int(np.argmin(dist))
            assignment.labels[block.id] = [cloud.labels[nearest]]
            assignment.scores[block.id] = 0.0
            if warnings is not None:
                warnings.append(
                    f"block {block.id} matched no cloud point; "
                    f"fell back to nearest point label '{cloud.labels[nearest]}'"
                )
            continue
        votes: dict[str, int] = {}
        for lab in (cloud.labels[i] for i in np.nonzero(inside)[0]):
            votes[lab] = votes.get(lab, 0) + 1
        shares = sorted(
            ((n / count, lab) for lab, n in votes.items()),
            key=lambda sl: (-sl[0], sl[1]),
        )
        kept = [lab for share, lab in shares if share >= tau]
        assignment.labels[block.id] = kept or [shares[0][1]]
        assignment.scores[block.id] = shares[0][0]
    return assignment


@dataclass
class DatasetEntry:
    id: str
    track: str
    category: str
    program: SourceFile
    gt: BlockAssignment
    label_set: LabelList
    path: str = ""


def build_manifest(entries: list[DatasetEntry]) -> tuple[dict, dict]:
    """(manifest, per-track stats in Table-1 shape: programs, lines, parts)."""
    seen: set[str] = set()
    items = []
    for e in entries:
        if e.id in seen:
            raise DuplicateIdError(e.id)
        seen.add(e.id)
        items.append(
            {
                "id": e.id,
                "track": e.track,
                "category": e.category,
                "path": e.path or f"{e.id}.scad",
                "labels": list(e.label_set.labels),
            }
        )
    manifest = {"entries": items}

    stats: dict[str, dict] = {}
    by_track: dict[str, list[DatasetEntry]] = {}
    for e in entries:
        by_track.setdefault(e.track, []).append(e)
    for track, group in sorted(by_track.items()):
        lines = [e.program.num_lines for e in group]
        parts: dict[str, int] = {}
        for e in group:
            parts[e.category] = max(parts.get(e.category, 0), len(e.label_set.labels))
        stats[track] = {
            "programs": len(group),
            "lines": {
                "min": min(lines),
                "median": int(statistics.median(lines)),
                "max": max(lines),
            },
            "parts": dict(sorted(parts.items())),
        }
    return manifest, stats


def build_entry(entry_id: str, track: str, category: str,
                records: list[PrimitiveRecord], label_set: LabelList,
                cloud: Optional[LabeledPointCloud] = None,
                tau: float = SHARE_THRESHOLD) -> tuple[DatasetEntry, list[str]]:
    """Translate records, attach ground truth (inline labels or cloud transfer)."""
    known = set(label_set.labels)
    for i, rec in enumerate(records):
        stray = [lab for lab in rec.gt_labels if lab not in known]
        if stray:
            raise InvalidPrimitiveError(i, f"gt labels {stray} not in the label set")
    if cloud is not None:
        stray = sorted({lab for lab in cloud.labels if lab not in known})
        if stray:
            raise InvalidPrimitiveError(0, f"cloud labels {stray} not in the label set")
    program, _sidecar = translate_primitives(records, path=f"{entry_id}.scad")
    tree = expand(parse(program))
    blocks = extract_blocks(tree)
    warnings: list[str] = []
    if cloud is not None:
        shape = Shape(tree, blocks)
        gt = transfer_labels(blocks, shape, cloud, tau=tau, warnings=warnings)
    else:
        leaves = blocks.irreducible()
        if len(leaves) != len(records):
            raise InvalidPrimitiveError(0, "record/block count mismatch")
        gt = BlockAssignment()
        for block, rec in zip(leaves, records):
            if not rec.gt_labels:
                raise InvalidPrimitiveError(0, "record lacks gt_labels and no cloud given")
            gt.labels[block.id] = list(rec.gt_labels)
            gt.scores[block.id] = 1.0
        for block in blocks.in_source_order():
            if block.kind == "composite":
                gt.labels.setdefault(block.id, [])
    commented = insert_comments(program, blocks, _complete(gt, blocks), warnings=warnings)
    entry = DatasetEntry(id=entry_id, track=track, category=category,
                         program=commented, gt=gt, label_set=label_set,
                         path=f"{entry_id}.scad")
    return entry, warnings


def _complete(gt: BlockAssignment, blocks: BlockSet) -> BlockAssignment:
    out = BlockAssignment(labels=dict(gt.labels), scores=dict(gt.scores))
    for b in blocks.in_source_order():
        out.labels.setdefault(b.id, [])
    return out
