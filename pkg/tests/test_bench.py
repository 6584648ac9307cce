"""Benchmark harness: report schema, stage rows, determinism of quality."""
import csv
import json
import os

import pytest

from pointbake.bench import profile_pipeline
from pointbake.cli import main
from pointbake.errors import ManifestError

STAGES = {"mesh_load", "unwrap", "bake", "io", "total"}


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("benchscene")
    rc = main([
        "synth", "checker-plane", "--points", "4000", "--seed", "12",
        "--resolution", "128", "--high-detail", "4", "-o", str(d),
    ])
    assert rc == 0
    return d


@pytest.fixture(scope="module")
def report(scene_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("benchreport")
    summary = profile_pipeline(str(scene_dir / "manifest.json"), str(out))
    return out, summary


class TestReport:
    def test_csv_has_all_method_stage_rows(self, report):
        out, _ = report
        with open(out / "report.csv", "r", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        seen = {(r["method"], r["stage"]) for r in rows}
        assert seen == {(m, s) for m in ("point", "lpm", "remesh") for s in STAGES}

    def test_wall_times_positive(self, report):
        out, _ = report
        with open(out / "report.csv", "r", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        by = {(r["method"], r["stage"]): r for r in rows}
        for method in ("point", "lpm", "remesh"):
            assert float(by[method, "bake"]["wall_ms"]) > 0
            total = float(by[method, "total"]["wall_ms"])
            assert total > float(by[method, "bake"]["wall_ms"])

    def test_peak_rss_sampled(self, report):
        out, _ = report
        with open(out / "report.csv", "r", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            if r["stage"] == "total":
                assert int(r["peak_rss_bytes"]) > 10_000_000  # interpreter alone is larger

    def test_summary_and_frames(self, report):
        out, summary = report
        assert summary["reference"] == "analytic"
        assert set(summary["methods"]) == {"point", "lpm", "remesh"}
        for method, entry in summary["methods"].items():
            for frame in entry["frames"]:
                assert frame["rmse"] >= 0.0
                assert frame["psnr_db"] is None or frame["psnr_db"] > 0.0
        for name in ("point_cam0.png", "lpm_cam0.png", "remesh_cam0.png", "reference_cam0.png"):
            assert (out / "frames" / name).exists()
        with open(out / "summary.json", "r", encoding="utf-8") as fh:
            on_disk = json.load(fh)
        assert on_disk["methods"] == summary["methods"]
        assert on_disk["sampler"]["target_hz"] >= 10

    def test_rerun_reproduces_quality_metrics(self, report, scene_dir, tmp_path):
        _, first = report
        second = profile_pipeline(str(scene_dir / "manifest.json"), str(tmp_path / "again"))
        assert first["methods"] == second["methods"]


class TestManifestValidation:
    def test_missing_field_named(self, scene_dir, tmp_path):
        with open(scene_dir / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        del manifest["cameras"]
        p = tmp_path / "m.json"
        p.write_text(json.dumps(manifest))
        with pytest.raises(ManifestError, match="cameras"):
            profile_pipeline(str(p), str(tmp_path / "r"))

    def test_missing_referenced_file(self, scene_dir, tmp_path):
        with open(scene_dir / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        manifest["cloud"] = "absent.ply"
        p = tmp_path / "m.json"
        p.write_text(json.dumps(manifest))
        with pytest.raises(ManifestError, match="absent.ply"):
            profile_pipeline(str(p), str(tmp_path / "r"))

    def test_bad_reference_kind(self, scene_dir, tmp_path):
        with open(scene_dir / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        manifest["reference"] = "oracle"
        p = tmp_path / "m.json"
        p.write_text(json.dumps(manifest))
        with pytest.raises(ManifestError, match="oracle"):
            profile_pipeline(str(p), str(tmp_path / "r"))

    def test_without_high_mesh_skips_remesh(self, scene_dir, tmp_path):
        with open(scene_dir / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        del manifest["high_mesh"]
        p = scene_dir / "nohigh.json"  # same dir so relative paths resolve
        p.write_text(json.dumps(manifest))
        summary = profile_pipeline(str(p), str(tmp_path / "r"))
        assert set(summary["methods"]) == {"point", "lpm"}

    def test_dense_render_reference(self, scene_dir, tmp_path):
        with open(scene_dir / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        manifest["reference"] = "dense-render"
        p = scene_dir / "dense.json"
        p.write_text(json.dumps(manifest))
        summary = profile_pipeline(str(p), str(tmp_path / "r"))
        assert summary["reference"] == "dense-render"
        assert (tmp_path / "r" / "frames" / "reference_cam0.png").exists()
        for entry in summary["methods"].values():
            assert entry["frames"][0]["rmse"] >= 0.0
