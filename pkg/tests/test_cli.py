"""CLI behavior and exit-code tests (everything runs in-process)."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from conftest import airplane_records
from scadnotate.cli import main
from scadnotate.render import morphological_close, u8_from_png

PLANE = """// body
translate([0, 0, 0]) cube([8, 1.2, 1.2], center=true);
// wings
translate([0.5, 0, 0.8]) cube([1.4, 7, 0.3], center=true);
// tail
translate([-3.6, 0, 1]) cube([0.8, 2.4, 0.3], center=true);
// engine
translate([1.8, 1.8, -0.2]) cube([1.2, 0.8, 0.8], center=true);
"""

FAST_CONFIG = "[render]\nresolution = 96\nclosing_iterations = 0\n"


@pytest.fixture
def runner():
    return CliRunner()


def write(path, text):
    Path(path).write_text(text, encoding="utf-8")


class TestParseAndBlocks:
    def test_parse_dump_ast(self, runner):
        with runner.isolated_filesystem():
            write("a.scad", "cube([1,2,3]);\n")
            result = runner.invoke(main, ["parse", "a.scad", "--dump-ast"])
            assert result.exit_code == 0
            obj = json.loads(result.output)
            kinds = {n["kind"] for n in obj["nodes"]}
            assert "primitive:cube" in kinds

    def test_parse_error_exit_2(self, runner):
        with runner.isolated_filesystem():
            write("bad.scad", "cube(;\n")
            result = runner.invoke(main, ["parse", "bad.scad"])
            assert result.exit_code == 2

    def test_blocks_json(self, runner):
        with runner.isolated_filesystem():
            write("a.scad", "union(){cube(1); sphere(2);}\n")
            result = runner.invoke(main, ["blocks", "a.scad"])
            assert result.exit_code == 0
            forest = json.loads(result.output)
            assert [b["kind"] for b in forest] == ["irreducible", "irreducible"]
            assert all({"id", "kind", "span", "parent", "children"} <= set(b) for b in forest)


class TestRender:
    def test_file_counts(self, runner):
        with runner.isolated_filesystem():
            write("two.scad", "cube(1); translate([3,0,0]) sphere(0.8);\n")
            result = runner.invoke(
                main, ["render", "two.scad", "out", "--views", "3", "--resolution", "48"])
            assert result.exit_code == 0, result.output
            out = Path("out")
            assert len(list(out.glob("depth_*.png"))) == 3
            assert len(list(out.glob("closed_*.png"))) == 3
            assert len(list(out.glob("mask_*_*.png"))) == 6  # 3 views x 2 blocks
            views = json.loads((out / "views.json").read_text())
            assert len(views["views"]) == 3

    def test_closing_flag_applies_only_closing(self, runner):
        with runner.isolated_filesystem():
            write("s.scad", "sphere(1);\n")
            result = runner.invoke(
                main, ["render", "s.scad", "out", "--views", "1",
                       "--resolution", "48", "--closing", "3"])
            assert result.exit_code == 0
            raw = u8_from_png((Path("out") / "depth_0.png").read_bytes())
            closed = u8_from_png((Path("out") / "closed_0.png").read_bytes())
            assert (closed == morphological_close(raw, 3)).all()

    def test_dump_pgm_flag(self, runner):
        with runner.isolated_filesystem():
            write("s.scad", "sphere(1);\n")
            result = runner.invoke(
                main, ["render", "s.scad", "out", "--views", "1",
                       "--resolution", "32", "--dump-pgm"])
            assert result.exit_code == 0
            data = (Path("out") / "depth_0.pgm").read_bytes()
            assert data.startswith(b"P5\n32 32\n65535\n")

    def test_render_outputs_byte_identical(self, runner):
        with runner.isolated_filesystem():
            write("s.scad", "union(){cube(1); translate([2,0,0]) sphere(0.7);}\n")
            for out in ("r1", "r2"):
                result = runner.invoke(
                    main, ["render", "s.scad", out, "--views", "2", "--resolution", "48"])
                assert result.exit_code == 0
            for name in sorted(p.name for p in Path("r1").iterdir()):
                assert (Path("r1") / name).read_bytes() == (Path("r2") / name).read_bytes(), name

    def test_empty_shape_exit_3(self, runner):
        with runner.isolated_filesystem():
            write("empty.scad", "intersection(){cube(1); translate([9,0,0]) cube(1);}\n")
            result = runner.invoke(main, ["render", "empty.scad", "out"])
            assert result.exit_code == 3


class TestComment:
    def test_oracle_run_reproduces_gt(self, runner):
        with runner.isolated_filesystem():
            write("cfg.toml", FAST_CONFIG)
            write("plane.scad", PLANE)
            result = runner.invoke(main, ["--config", "cfg.toml", "comment", "plane.scad",
                                          "--category", "airplane"])
            assert result.exit_code == 0, result.output
            commented = Path("plane.commented.scad").read_text()
            assert commented == PLANE  # oracle reproduces the ground truth exactly
            report = json.loads(Path("plane.report.json").read_text())
            assert report["labels"] == ["body", "wings", "tail", "engine"]
            assert {b["label"] for b in report["blocks"]} == set(report["labels"])
            assert "config" in report and "timings" in report

    def test_labels_override(self, runner):
        with runner.isolated_filesystem():
            write("cfg.toml", FAST_CONFIG)
            write("plane.scad", PLANE)
            result = runner.invoke(main, ["--config", "cfg.toml", "comment", "plane.scad",
                                          "--category", "airplane",
                                          "--labels", "body,wings,tail,engine"])
            assert result.exit_code == 0
            report = json.loads(Path("plane.report.json").read_text())
            assert report["labels"] == ["body", "wings", "tail", "engine"]

    def test_remote_without_url_exit_5(self, runner):
        with runner.isolated_filesystem():
            write("plane.scad", PLANE)
            result = runner.invoke(main, ["comment", "plane.scad", "--category", "airplane",
                                          "--provider", "remote"])
            assert result.exit_code == 5

    def test_reproducible_byte_identical(self, runner):
        with runner.isolated_filesystem():
            write("cfg.toml", FAST_CONFIG)
            write("plane.scad", PLANE)
            for out_dir in ("a", "b"):
                result = runner.invoke(main, ["--config", "cfg.toml", "comment",
                                              "plane.scad", "--category", "airplane",
                                              "--out-dir", out_dir])
                assert result.exit_code == 0
            a = json.loads(Path("a/plane.report.json").read_text())
            b = json.loads(Path("b/plane.report.json").read_text())
            a.pop("timings")
            b.pop("timings")
            assert a == b
            assert (Path("a/plane.commented.scad").read_bytes()
                    == Path("b/plane.commented.scad").read_bytes())


class TestEval:
    def test_identical_files_full_marks(self, runner):
        with runner.isolated_filesystem():
            write("gt.scad", PLANE)
            result = runner.invoke(main, ["eval", "gt.scad", "gt.scad"])
            assert result.exit_code == 0, result.output
            report = json.loads(result.output)
            assert report["b_acc"] == 1.0 and report["s_iou"] == 1.0

    def test_hand_fixture_7_12(self, runner):
        gt = ("// wing\ncube(1);\n// wing\ntranslate([2,0,0]) cube(1);\n"
              "// wing\ntranslate([4,0,0]) cube(1);\n// tail\ntranslate([6,0,0]) cube(1);\n")
        pred = ("// wing\ncube(1);\n// wing\ntranslate([2,0,0]) cube(1);\n"
                "// tail\ntranslate([4,0,0]) cube(1);\n// tail\ntranslate([6,0,0]) cube(1);\n")
        with runner.isolated_filesystem():
            write("gt.scad", gt)
            write("pred.scad", pred)
            result = runner.invoke(main, ["eval", "pred.scad", "gt.scad"])
            assert result.exit_code == 0
            report = json.loads(result.output)
            assert abs(report["s_iou"] - 7 / 12) < 1e-12

    def test_structural_mismatch_exit_6(self, runner):
        with runner.isolated_filesystem():
            write("a.scad", "cube(1);\n")
            write("b.scad", "sphere(1);\n")
            result = runner.invoke(main, ["eval", "a.scad", "b.scad"])
            assert result.exit_code == 6

    def test_synonyms_provider_fallback(self, runner):
        # the oracle provider's mapping is the plural-stem fallback
        with runner.isolated_filesystem():
            write("gt.scad", "// wing\ncube(1);\n")
            write("pred.scad", "// wings\ncube(1);\n")
            mapped = runner.invoke(main, ["eval", "pred.scad", "gt.scad",
                                          "--synonyms", "provider"])
            assert mapped.exit_code == 0
            assert json.loads(mapped.output)["b_acc"] == 1.0

    def test_synonyms_map_file(self, runner):
        with runner.isolated_filesystem():
            write("gt.scad", "// wing\ncube(1);\n")
            write("pred.scad", "// wings\ncube(1);\n")
            write("syn.json", json.dumps({"wings": "wing"}))
            plain = runner.invoke(main, ["eval", "pred.scad", "gt.scad"])
            mapped = runner.invoke(main, ["eval", "pred.scad", "gt.scad",
                                          "--synonyms", "syn.json"])
            assert json.loads(plain.output)["b_acc"] == 0.0
            assert json.loads(mapped.output)["b_acc"] == 1.0


class TestDataset:
    def test_build_and_stats(self, runner):
        with runner.isolated_filesystem():
            for i in range(3):
                write(f"rec{i}.json", json.dumps({"records": airplane_records(seed=i)}))
            result = runner.invoke(main, ["dataset", "build", "rec0.json", "rec1.json",
                                          "rec2.json", "--out", "track",
                                          "--track", "CubeL", "--category", "airplane"])
            assert result.exit_code == 0, result.output
            stats = json.loads(result.output)
            assert stats["CubeL"]["programs"] == 3
            assert stats["CubeL"]["parts"] == {"airplane": 4}
            assert stats["CubeL"]["lines"]["min"] == stats["CubeL"]["lines"]["max"]
            assert Path("track/manifest.json").exists()
            again = runner.invoke(main, ["dataset", "stats", "track"])
            assert again.exit_code == 0
            assert json.loads(again.output)["CubeL"]["programs"] == 3

    def test_cloud_transfer_path(self, runner):
        with runner.isolated_filesystem():
            records = {"records": [
                {"kind": "cuboid", "size": [2, 2, 2], "translation": [0, 0, 0]},
                {"kind": "cuboid", "size": [2, 2, 2], "translation": [5, 0, 0]},
            ]}
            write("rec.json", json.dumps(records))
            cloud = {"points": [[0, 0, 0], [0.3, 0, 0], [5, 0, 0]],
                     "labels": ["wing", "wing", "engine"]}
            write("cloud.json", json.dumps(cloud))
            result = runner.invoke(main, ["dataset", "build", "rec.json", "--out", "t",
                                          "--cloud", "cloud.json",
                                          "--labels", "wing,engine"])
            assert result.exit_code == 0, result.output
            program = Path("t/rec.scad").read_text()
            assert "// wing" in program and "// engine" in program

    def test_invalid_records_exit_7(self, runner):
        with runner.isolated_filesystem():
            write("bad.json", json.dumps({"records": [{"kind": "cuboid", "size": [0, 1, 1]}]}))
            result = runner.invoke(main, ["dataset", "build", "bad.json", "--out", "t"])
            assert result.exit_code == 7


class TestConfig:
    def test_env_override(self, runner, monkeypatch):
        from scadnotate.config import load_config

        monkeypatch.setenv("CADTALKER_PROVIDER_URL", "http://host:9")
        monkeypatch.setenv("CADTALKER_RENDER_RESOLUTION", "64")
        cfg = load_config(None)
        assert cfg.provider.url == "http://host:9"
        assert cfg.render.resolution == 64

    def test_defaults_match_pinned_constants(self):
        from scadnotate.config import Config

        cfg = Config()
        assert cfg.render.views == 10
        assert cfg.render.elevation_deg == 55.0
        assert cfg.render.resolution == 512
        assert (cfg.vote.t_image, cfg.vote.t_view, cfg.vote.t_shape) == (0.001, 0.01, 0.02)
        assert cfg.vote.images_per_view == 4

    def test_config_file_sections(self, runner):
        from scadnotate.config import load_config

        with runner.isolated_filesystem():
            write("cfg.toml", "[provider]\nkind = \"remote\"\nurl = \"http://x\"\n"
                              "[vote]\nt_shape = 0.05\n")
            cfg = load_config("cfg.toml", env={})
            assert cfg.provider.kind == "remote"
            assert cfg.provider.url == "http://x"
            assert cfg.vote.t_shape == 0.05
