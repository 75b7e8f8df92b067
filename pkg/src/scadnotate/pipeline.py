"""End-to-end commenting pipeline.

parse -> expand -> blocks -> view-ring render -> depth processing ->
synthesize -> detect -> segment -> score -> aggregate -> assign -> insert.
Single-view provider failures are tolerated (the view is dropped with a
warning) as long as at least 60% of the views succeed.
"""

from __future__ import annotations

import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from .blocks import BlockAssignment, BlockSet, extract_blocks, insert_comments, read_ground_truth
from .config import Config
from .errors import (
    MalformedCommentError,
    PipelineFailed,
    ProviderError,
    ProviderUnreachable,
    ScadnotateError,
)
from .evaluate import expand
from .geometry import Shape
from .nodes import SourceFile
from .parser import parse
from .providers.base import (
    PROMPT_TEMPLATE,
    LabelList,
    Provider,
    SceneContext,
    SegmentMask,
    SynthesisRequest,
)
from .render import (
    make_view_ring,
    morphological_close,
    encode_depth_8bit,
    png_from_u8,
    render_all_block_masks,
    render_depth,
    u8_from_png,
)
from .voting import (
    ConfidenceMatrix,
    ScoreBreakdown,
    aggregate_shape,
    aggregate_view,
    assign_labels,
    score_image,
)

VIEW_SUCCESS_FLOOR = 0.6  # fraction of views that must survive provider failures


class _ViewFailure(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


class _Timer:
    def __init__(self, timings: dict):
        self.timings = timings
        self._lock = threading.Lock()

    def add(self, stage: str, seconds: float) -> None:
        with self._lock:
            self.timings[stage] = self.timings.get(stage, 0.0) + seconds


def _stage(timer: _Timer, name: str):
    class _Ctx:
        def __enter__(self):
            self.t0 = time.perf_counter()

        def __exit__(self, exc_type, exc, tb):
            timer.add(name, time.perf_counter() - self.t0)
            if exc is not None and isinstance(exc, ScadnotateError) and not isinstance(exc, PipelineFailed):
                raise PipelineFailed(name, str(exc)) from exc
            return False

    return _Ctx()


def _process_view(view: int, shape: Shape, cam, provider: Provider, labels: LabelList,
                  scene_gt, category: str, config: Config, timer: _Timer,
                  block_order: tuple[int, ...]) -> ConfidenceMatrix:
    vote = config.vote
    t0 = time.perf_counter()
    depth = render_depth(shape, cam)
    masks = render_all_block_masks(shape, cam, depth)
    timer.add("render", time.perf_counter() - t0)

    t0 = time.perf_counter()
    raw = u8_from_png(encode_depth_8bit(depth))
    closed = morphological_close(raw, config.render.closing_iterations)
    depth_png = png_from_u8(closed)
    timer.add("process_depth", time.perf_counter() - t0)

    t0 = time.perf_counter()
    req = SynthesisRequest(
        depth_image=depth_png,
        prompt=PROMPT_TEMPLATE.format(category=category),
        n_images=vote.images_per_view,
        seeds=tuple(range(1, vote.images_per_view + 1)),
        resolution=config.render.resolution,
    )
    try:
        images = provider.synthesize(req)
    except (ProviderUnreachable, ProviderError) as exc:
        raise _ViewFailure("synthesize", str(exc)) from exc
    timer.add("synthesize", time.perf_counter() - t0)

    scene = None
    if scene_gt is not None:
        scene = SceneContext(view=view, gt=scene_gt, block_masks=masks)

    image_matrices = []
    for img in images:
        t0 = time.perf_counter()
        try:
            detections = provider.detect(img, labels, scene)
            pairs: list[tuple] = []
            for det in detections:
                seg: SegmentMask = provider.segment(img, det.box, det.label, scene)
                pairs.append((det, seg))
        except (ProviderUnreachable, ProviderError) as exc:
            raise _ViewFailure("detect_segment", str(exc)) from exc
        timer.add("detect_segment", time.perf_counter() - t0)

        t0 = time.perf_counter()
        image_matrices.append(score_image(pairs, masks, labels, block_order, vote))
        timer.add("score", time.perf_counter() - t0)

    t0 = time.perf_counter()
    view_matrix = aggregate_view(image_matrices, vote)
    timer.add("aggregate", time.perf_counter() - t0)
    return view_matrix


def comment_pipeline(source: SourceFile, category: str, provider: Provider,
                     config: Optional[Config] = None,
                     labels_override: Optional[list[str]] = None,
                     workers: int = 4) -> tuple[SourceFile, dict]:
    """Comment every commentable block of `source`; returns (text, run report)."""
    config = config or Config()
    vote = config.vote
    timings: dict[str, float] = {}
    timer = _Timer(timings)
    warnings: list[str] = []

    with _stage(timer, "parse"):
        tree = parse(source)
    with _stage(timer, "expand"):
        expanded = expand(tree)
    with _stage(timer, "blocks"):
        blocks: BlockSet = extract_blocks(expanded)
    with _stage(timer, "execute"):
        shape = Shape(expanded, blocks)
        shape.require_nonempty()
        warnings.extend(shape.warnings)
    with _stage(timer, "view_ring"):
        ring = make_view_ring(
            shape.bounds(),
            n=config.render.views,
            elevation=config.render.elevation_deg,
            resolution=config.render.resolution,
            fov=config.render.fov_deg,
            radius_factor=config.render.radius_factor,
        )
    with _stage(timer, "labels"):
        if labels_override:
            labels = LabelList(category=category, labels=tuple(labels_override))
        else:
            labels = provider.suggest_labels(category)

    # the oracle provider reads ground truth from the input program's comments
    scene_gt = None
    if getattr(provider, "kind", "") == "oracle":
        try:
            scene_gt = read_ground_truth(source, blocks)
        except MalformedCommentError as exc:
            warnings.append(f"oracle ground truth unavailable: {exc}")
            scene_gt = BlockAssignment()  # no labels: oracle will detect nothing

    block_order = tuple(b.id for b in blocks.in_source_order())
    view_matrices: dict[int, ConfidenceMatrix] = {}
    failures: list[tuple[int, str, str]] = []  # (view, stage, message)

    def run_view(v: int):
        try:
            view_matrices[v] = _process_view(
                v, shape, ring.cameras[v], provider, labels, scene_gt,
                category, config, timer, block_order)
        except _ViewFailure as exc:
            failures.append((v, exc.stage, str(exc)))

    n_views = len(ring.cameras)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, n_views)) as pool:
            list(pool.map(run_view, range(n_views)))
    else:
        for v in range(n_views):
            run_view(v)

    floor = max(1, math.ceil(VIEW_SUCCESS_FLOOR * n_views))
    if len(view_matrices) < floor:
        stage = failures[0][1] if failures else "synthesize"
        raise PipelineFailed(stage, f"only {len(view_matrices)}/{n_views} views "
                                    f"succeeded (need {floor})")
    for v, stage, message in sorted(failures):
        warnings.append(f"view {v} dropped at stage {stage}: {message}")

    with _stage(timer, "aggregate"):
        shape_matrix = aggregate_shape(
            [view_matrices[v] for v in sorted(view_matrices)], vote)
    with _stage(timer, "assign"):
        assignment = assign_labels(shape_matrix, vote, warnings)
    with _stage(timer, "insert"):
        commented = insert_comments(source, blocks, assignment, warnings)

    breakdown = ScoreBreakdown(matrix=shape_matrix, assignment=assignment)
    span_of = {b.id: list(b.span) for b in blocks.in_source_order()}
    rows = breakdown.rows()
    for row in rows:
        row["span"] = span_of[row["id"]]
    report = {
        "program": source.path,
        "category": category,
        "labels": list(labels.labels),
        "blocks": rows,
        "views_used": sorted(view_matrices),
        "warnings": warnings,
        "timings": {k: round(v, 6) for k, v in sorted(timings.items())},
        "config": config.snapshot(),
    }
    return commented, report
