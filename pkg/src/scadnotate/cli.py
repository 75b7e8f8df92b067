"""Command-line entry points for every pipeline stage.

Exit codes: 2 parse error, 3 geometry error, 4 pipeline failure, 5 provider
misconfiguration, 6 block-set mismatch, 7 invalid dataset records.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from .blocks import extract_blocks, read_ground_truth
from .config import Config, load_config
from .dataset import (
    DatasetEntry,
    build_entry,
    build_manifest,
    cloud_from_json,
    cloud_from_ply,
    records_from_json,
)
from .errors import (
    DuplicateIdError,
    EmptyCloudError,
    EmptyShapeError,
    DegenerateBoundsError,
    EvalError,
    InvalidPrimitiveError,
    LexError,
    NoGroundTruthError,
    NotExpandedError,
    ParseError,
    PipelineFailed,
    ProviderError,
    ProviderUnreachable,
    UnknownCategoryError,
    UnknownIdentifierError,
)
from .evaluate import expand
from .geometry import Shape
from .metrics import evaluate
from .nodes import SourceFile, structurally_equal
from .parser import parse, parse_file
from .pipeline import comment_pipeline
from .providers import SynonymMap, make_provider
from .render import (
    encode_depth_8bit,
    make_view_ring,
    morphological_close,
    pgm16_from_depth,
    png_from_mask,
    png_from_u8,
    render_all_block_masks,
    render_depth,
    u8_from_png,
)

EXIT_PARSE = 2
EXIT_GEOMETRY = 3
EXIT_PIPELINE = 4
EXIT_PROVIDER = 5
EXIT_BLOCKSET = 6
EXIT_RECORDS = 7

_PARSE_ERRORS = (LexError, ParseError, UnknownIdentifierError)
_GEOMETRY_ERRORS = (EvalError, NotExpandedError, EmptyShapeError, DegenerateBoundsError)
_RECORD_ERRORS = (InvalidPrimitiveError, EmptyCloudError, DuplicateIdError)


def _die(code: int, message: str) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML-style config file; env vars CADTALKER_* override.")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str]) -> None:
    """Semantic part comments for CSG CAD programs."""
    ctx.obj = load_config(config_path)


@main.command("parse")
@click.argument("file", type=click.Path(exists=True))
@click.option("--dump-ast", is_flag=True, default=False, help="Emit the full AST as JSON.")
def cmd_parse(file: str, dump_ast: bool) -> None:
    """Parse a program and report (or dump) its syntax tree."""
    try:
        tree = parse_file(file)
    except _PARSE_ERRORS as exc:
        _die(EXIT_PARSE, f"{type(exc).__name__}: {exc}")
    if dump_ast:
        click.echo(tree.to_json())
    else:
        counts: dict[str, int] = {}
        for node in tree.walk():
            counts[node.kind] = counts.get(node.kind, 0) + 1
        _emit({"file": file, "nodes": counts})


@main.command("blocks")
@click.argument("file", type=click.Path(exists=True))
@click.pass_obj
def cmd_blocks(cfg: Config, file: str) -> None:
    """Emit the commentable block forest as JSON."""
    try:
        tree = expand(parse_file(file))
        bs = extract_blocks(tree)
    except _PARSE_ERRORS as exc:
        _die(EXIT_PARSE, f"{type(exc).__name__}: {exc}")
    except _GEOMETRY_ERRORS as exc:
        _die(EXIT_GEOMETRY, f"{type(exc).__name__}: {exc}")
    _emit(bs.to_json_obj())


@main.command("render")
@click.argument("file", type=click.Path(exists=True))
@click.argument("out_dir", type=click.Path())
@click.option("--views", type=int, default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--closing", type=int, default=None, help="Morphological closing iterations.")
@click.option("--dump-pgm", is_flag=True, default=False,
              help="Also write lossless 16-bit PGM depth dumps.")
@click.pass_obj
def cmd_render(cfg: Config, file: str, out_dir: str, views: Optional[int],
               resolution: Optional[int], closing: Optional[int], dump_pgm: bool) -> None:
    """Render depth maps, closed depth maps, and per-block masks."""
    n_views = views if views is not None else cfg.render.views
    res = resolution if resolution is not None else cfg.render.resolution
    close_iters = closing if closing is not None else cfg.render.closing_iterations
    try:
        tree = expand(parse_file(file))
        bs = extract_blocks(tree)
        shape = Shape(tree, bs)
        shape.require_nonempty()
        ring = make_view_ring(shape.bounds(), n=n_views,
                              elevation=cfg.render.elevation_deg, resolution=res,
                              fov=cfg.render.fov_deg,
                              radius_factor=cfg.render.radius_factor)
    except _PARSE_ERRORS as exc:
        _die(EXIT_PARSE, f"{type(exc).__name__}: {exc}")
    except _GEOMETRY_ERRORS as exc:
        _die(EXIT_GEOMETRY, f"{type(exc).__name__}: {exc}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    views_meta = []
    for v, cam in enumerate(ring.cameras):
        depth = render_depth(shape, cam)
        raw_png = encode_depth_8bit(depth)
        (out / f"depth_{v}.png").write_bytes(raw_png)
        if dump_pgm:
            (out / f"depth_{v}.pgm").write_bytes(pgm16_from_depth(depth))
        closed = morphological_close(u8_from_png(raw_png), close_iters)
        (out / f"closed_{v}.png").write_bytes(png_from_u8(closed))
        for bid, mask in render_all_block_masks(shape, cam, depth).items():
            (out / f"mask_{v}_{bid}.png").write_bytes(png_from_mask(mask))
        views_meta.append(cam.to_json_obj())
    (out / "views.json").write_text(
        json.dumps({"views": views_meta, "closing_iterations": close_iters},
                   indent=2, sort_keys=True))
    click.echo(f"wrote {n_views} views x {len(bs.blocks)} blocks to {out}")


@main.command("comment")
@click.argument("file", type=click.Path(exists=True))
@click.option("--category", required=True, help="Object category, e.g. airplane.")
@click.option("--labels", default=None,
              help="Comma-separated part labels overriding the provider suggestion.")
@click.option("--provider", "provider_kind", default=None,
              type=click.Choice(["remote", "oracle"]), help="Override provider.kind.")
@click.option("--out-dir", type=click.Path(), default=None)
@click.option("--workers", type=int, default=4)
@click.pass_obj
def cmd_comment(cfg: Config, file: str, category: str, labels: Optional[str],
                provider_kind: Optional[str], out_dir: Optional[str], workers: int) -> None:
    """Run the full commenting pipeline; writes .commented.scad and .report.json."""
    kind = provider_kind or cfg.provider.kind
    try:
        provider = make_provider(kind, url=cfg.provider.url, llm_url=cfg.provider.llm_url,
                                 timeout_s=cfg.provider.timeout_s,
                                 oracle=cfg.provider.oracle_config())
    except ValueError as exc:
        _die(EXIT_PROVIDER, f"provider misconfiguration: {exc}")
    label_list = [s.strip() for s in labels.split(",")] if labels else None
    source = SourceFile.from_text(Path(file).read_text(encoding="utf-8"), file)
    try:
        commented, report = comment_pipeline(source, category, provider, cfg,
                                             labels_override=label_list, workers=workers)
    except _PARSE_ERRORS as exc:
        _die(EXIT_PARSE, f"{type(exc).__name__}: {exc}")
    except (UnknownCategoryError, ProviderUnreachable, ProviderError) as exc:
        _die(EXIT_PROVIDER, f"{type(exc).__name__}: {exc}")
    except PipelineFailed as exc:
        _die(EXIT_PIPELINE, f"PipelineFailed: {exc}")
    finally:
        provider.close()
    base = Path(out_dir) if out_dir else Path(file).parent
    base.mkdir(parents=True, exist_ok=True)
    stem = Path(file).stem
    commented_path = base / f"{stem}.commented.scad"
    report_path = base / f"{stem}.report.json"
    commented_path.write_text(commented.text, encoding="utf-8")
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    click.echo(f"wrote {commented_path} and {report_path}")


@main.command("eval")
@click.argument("pred_file", type=click.Path(exists=True))
@click.argument("gt_file", type=click.Path(exists=True))
@click.option("--synonyms", "synonyms_arg", default=None,
              help="Path to a {pred: gt} JSON map, or 'provider' to query the provider.")
@click.pass_obj
def cmd_eval(cfg: Config, pred_file: str, gt_file: str, synonyms_arg: Optional[str]) -> None:
    """Score a predicted (commented) program against a ground-truth one."""
    try:
        pred_src = SourceFile.from_text(Path(pred_file).read_text(encoding="utf-8"), pred_file)
        gt_src = SourceFile.from_text(Path(gt_file).read_text(encoding="utf-8"), gt_file)
        pred_tree = expand(parse(pred_src))
        gt_tree = expand(parse(gt_src))
    except _PARSE_ERRORS as exc:
        _die(EXIT_PARSE, f"{type(exc).__name__}: {exc}")
    if not structurally_equal(pred_tree, gt_tree):
        _die(EXIT_BLOCKSET, "block-set mismatch: programs differ structurally")
    pred_blocks = extract_blocks(pred_tree)
    gt_blocks = extract_blocks(gt_tree)
    if len(pred_blocks.blocks) != len(gt_blocks.blocks):
        _die(EXIT_BLOCKSET, "block-set mismatch: different block counts")
    pred = read_ground_truth(pred_src, pred_blocks)
    gt = read_ground_truth(gt_src, gt_blocks)
    synonyms = None
    if synonyms_arg == "provider":
        provider = make_provider(cfg.provider.kind, url=cfg.provider.url,
                                 llm_url=cfg.provider.llm_url,
                                 timeout_s=cfg.provider.timeout_s,
                                 oracle=cfg.provider.oracle_config())
        predicted_labels = sorted({l for ls in pred.labels.values() for l in ls})
        gt_labels = sorted({l for ls in gt.labels.values() for l in ls})
        synonyms = provider.map_synonyms(predicted_labels, gt_labels)
        provider.close()
    elif synonyms_arg:
        mapping = json.loads(Path(synonyms_arg).read_text(encoding="utf-8"))
        synonyms = SynonymMap(mapping=mapping)
    try:
        report = evaluate(pred, gt, synonyms)
    except NoGroundTruthError as exc:
        _die(EXIT_BLOCKSET, f"NoGroundTruth: {exc}")
    _emit(report.to_json_obj())


@main.group("dataset")
def cmd_dataset() -> None:
    """Build benchmark tracks and report their statistics."""


@cmd_dataset.command("build")
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--track", default="CubeL")
@click.option("--category", default="airplane")
@click.option("--labels", default=None, help="Comma-separated label set override.")
@click.option("--cloud", "cloud_path", type=click.Path(exists=True), default=None,
              help="Labeled point cloud (JSON or PLY) for label transfer; "
                   "only valid with a single input.")
@click.option("--tau", type=float, default=0.2, help="Label vote share threshold.")
@click.pass_obj
def cmd_dataset_build(cfg: Config, inputs: tuple[str, ...], out_dir: str, track: str,
                      category: str, labels: Optional[str], cloud_path: Optional[str],
                      tau: float) -> None:
    """Translate primitive-record JSON files into commented .scad programs."""
    from .providers import builtin_suggest
    from .providers.base import LabelList

    if cloud_path and len(inputs) != 1:
        _die(EXIT_RECORDS, "--cloud requires exactly one input file")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries: list[DatasetEntry] = []
    all_warnings: list[str] = []
    try:
        if labels:
            label_set = LabelList(category=category,
                                  labels=tuple(s.strip().lower() for s in labels.split(",")))
        else:
            label_set = builtin_suggest(category)
        for path in inputs:
            records = records_from_json(Path(path).read_text(encoding="utf-8"))
            cloud = None
            if cloud_path:
                text = Path(cloud_path).read_text(encoding="utf-8")
                cloud = cloud_from_ply(text) if text.startswith("ply") else cloud_from_json(text)
            entry, warnings = build_entry(Path(path).stem, track, category, records,
                                          label_set, cloud=cloud, tau=tau)
            entries.append(entry)
            all_warnings.extend(warnings)
        manifest, stats = build_manifest(entries)
    except _RECORD_ERRORS as exc:
        _die(EXIT_RECORDS, f"{type(exc).__name__}: {exc}")
    except _PARSE_ERRORS as exc:
        _die(EXIT_PARSE, f"{type(exc).__name__}: {exc}")
    for entry in entries:
        (out / entry.path).write_text(entry.program.text, encoding="utf-8")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for warning in all_warnings:
        click.echo(f"warning: {warning}", err=True)
    _emit(stats)


@cmd_dataset.command("stats")
@click.argument("data_dir", type=click.Path(exists=True))
def cmd_dataset_stats(data_dir: str) -> None:
    """Recompute Table-style statistics for a built track directory."""
    from .providers.base import LabelList

    root = Path(data_dir)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    entries = []
    try:
        for item in manifest["entries"]:
            source = SourceFile.from_text((root / item["path"]).read_text(encoding="utf-8"),
                                          item["path"])
            parse(source)  # validate
            entries.append(
                DatasetEntry(
                    id=item["id"], track=item.get("track", ""),
                    category=item.get("category", ""), program=source,
                    gt=read_ground_truth(source, extract_blocks(expand(parse(source)))),
                    label_set=LabelList(category=item.get("category", ""),
                                        labels=tuple(item.get("labels", ("part",)))),
                    path=item["path"],
                )
            )
        _, stats = build_manifest(entries)
    except _PARSE_ERRORS as exc:
        _die(EXIT_PARSE, f"{type(exc).__name__}: {exc}")
    except DuplicateIdError as exc:
        _die(EXIT_RECORDS, f"DuplicateId: {exc}")
    _emit(stats)


@main.command("serve")
@click.option("--port", type=int, default=None)
@click.option("--data-dir", type=click.Path(exists=True), default=None)
@click.option("--static-dir", type=click.Path(), default=None,
              help="Directory with the built review-UI bundle.")
@click.pass_obj
def cmd_serve(cfg: Config, port: Optional[int], data_dir: Optional[str],
              static_dir: Optional[str]) -> None:
    """Serve the review API (and UI bundle, when built) over HTTP."""
    import uvicorn

    from .service import create_app

    app = create_app(cfg, data_dir=data_dir, static_dir=static_dir)
    uvicorn.run(app, host="127.0.0.1", port=port or cfg.service.port)


if __name__ == "__main__":
    main()
