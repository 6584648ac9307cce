"""CLI behavior: outputs, exit codes, diagnostics, reproducibility."""
import json

import numpy as np
import pytest

from pointbake.assets import new_texel_grid, read_image, write_image
from pointbake.cli import main
from pointbake.metrics import psnr, rmse


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cliscene")
    rc = main([
        "synth", "checker-plane", "--points", "5000", "--seed", "7",
        "--resolution", "128", "--high-detail", "4", "-o", str(d),
    ])
    assert rc == 0
    return d


def checker_image(tmp_path, name, fill=None, size=32):
    grid = new_texel_grid(size)
    if fill is None:
        rng = np.random.default_rng(3)
        grid.data[:] = rng.integers(0, 256, size=grid.data.shape, dtype=np.uint8)
    else:
        grid.data[:] = fill
    path = tmp_path / name
    write_image(str(path), grid)
    return path


class TestCompare:
    def test_identical_files(self, tmp_path, capsys):
        img = checker_image(tmp_path, "a.png")
        assert main(["compare", str(img), str(img)]) == 0
        assert capsys.readouterr().out == "rmse=0 psnr=identical\n"

    def test_different_files_print_metrics(self, tmp_path, capsys):
        a = checker_image(tmp_path, "a.png", fill=(10, 10, 10))
        b = checker_image(tmp_path, "b.png", fill=(20, 30, 40))
        assert main(["compare", str(a), str(b)]) == 0
        out = capsys.readouterr().out
        ga = read_image(str(a))
        gb = read_image(str(b))
        assert out == f"rmse={rmse(ga, gb):.6g} psnr={psnr(ga, gb):.6g}\n"

    def test_shape_mismatch_exits_3(self, tmp_path, capsys):
        a = checker_image(tmp_path, "a.png", size=16)
        b = checker_image(tmp_path, "b.png", size=32)
        assert main(["compare", str(a), str(b)]) == 3
        assert capsys.readouterr().err.count("\n") == 1

    def test_missing_file_exits_3(self, tmp_path):
        a = checker_image(tmp_path, "a.png")
        assert main(["compare", str(a), str(tmp_path / "nope.png")]) == 3


class TestExitCodes:
    def test_no_arguments_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_bad_camera_spec_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["render", "m.obj", "a.png", "--camera", "1,2,3", "-o", "f.png"])
        assert exc.value.code == 2

    def test_unknown_scene_kind_exits_4(self, tmp_path, capsys):
        rc = main(["synth", "klein-bottle", "--points", "2000", "-o", str(tmp_path)])
        assert rc == 4
        err = capsys.readouterr().err
        assert err.startswith("pointbake:") and err.count("\n") == 1

    def test_bad_bake_config_exits_4(self, scene_dir, tmp_path, capsys):
        rc = main([
            "bake", str(scene_dir / "cloud.ply"), str(scene_dir / "low.obj"),
            "--d-max", "-1", "-o", str(tmp_path / "x"),
        ])
        assert rc == 4

    def test_bake_without_uvs_mentions_unwrap(self, scene_dir, tmp_path, capsys):
        rc = main([
            "bake", str(scene_dir / "cloud.ply"), str(scene_dir / "low.obj"),
            "-o", str(tmp_path / "x"),
        ])
        assert rc == 3
        assert "unwrap" in capsys.readouterr().err


class TestPipeline:
    def test_synth_outputs(self, scene_dir):
        for name in ("cloud.ply", "low.obj", "high.obj", "manifest.json"):
            assert (scene_dir / name).exists()

    def test_unwrap_bake_render_compare_chain(self, scene_dir, tmp_path, capsys):
        unwrapped = tmp_path / "unwrapped.obj"
        rc = main([
            "unwrap", str(scene_dir / "low.obj"),
            "--resolution", "128", "--gutter", "2", "-o", str(unwrapped),
        ])
        assert rc == 0
        with open(scene_dir / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        rc = main([
            "bake", str(scene_dir / "cloud.ply"), str(unwrapped),
            "--d-max", str(manifest["cfg"]["d_max"]), "--resolution", "128",
            "-o", str(tmp_path / "baked"),
        ])
        assert rc == 0
        cam = manifest["cameras"][0]
        camspec = ",".join(
            str(v) for v in (*cam["position"], *cam["look_at"], cam["fov_deg"])
        )
        rc = main([
            "render", str(unwrapped), str(tmp_path / "baked_albedo.png"),
            str(tmp_path / "baked_normal.png"),
            "--camera", camspec, "--size", "64x64",
            "--light", ",".join(str(v) for v in manifest["light"]),
            "-o", str(tmp_path / "frame.png"),
        ])
        assert rc == 0
        rc = main(["compare", str(tmp_path / "frame.png"), str(tmp_path / "frame.png")])
        assert rc == 0
        assert capsys.readouterr().out.endswith("psnr=identical\n")
        stats = json.loads((tmp_path / "baked_stats.json").read_text())
        assert stats["counts"]["covered_texels"] > 0

    def test_bake_reproducible_with_jobs(self, scene_dir, tmp_path):
        unwrapped = tmp_path / "u.obj"
        assert main([
            "unwrap", str(scene_dir / "low.obj"), "--resolution", "128",
            "-o", str(unwrapped),
        ]) == 0
        for tag in ("one", "two"):
            rc = main([
                "bake", str(scene_dir / "cloud.ply"), str(unwrapped),
                "--d-max", "0.5", "--resolution", "128", "--jobs", "4",
                "-o", str(tmp_path / tag),
            ])
            assert rc == 0
        for suffix in ("_albedo.png", "_normal.png"):
            a = (tmp_path / f"one{suffix}").read_bytes()
            b = (tmp_path / f"two{suffix}").read_bytes()
            assert a == b, suffix

    def test_no_normals_skips_normal_map(self, scene_dir, tmp_path):
        unwrapped = tmp_path / "u.obj"
        assert main([
            "unwrap", str(scene_dir / "low.obj"), "--resolution", "128",
            "-o", str(unwrapped),
        ]) == 0
        rc = main([
            "bake", str(scene_dir / "cloud.ply"), str(unwrapped),
            "--d-max", "0.5", "--resolution", "128", "--no-normals",
            "-o", str(tmp_path / "flat"),
        ])
        assert rc == 0
        assert (tmp_path / "flat_albedo.png").exists()
        assert not (tmp_path / "flat_normal.png").exists()

    def test_bake_lpm_and_remesh_run(self, scene_dir, tmp_path):
        unwrapped = tmp_path / "u.obj"
        assert main([
            "unwrap", str(scene_dir / "low.obj"), "--resolution", "128",
            "-o", str(unwrapped),
        ]) == 0
        rc = main([
            "bake-lpm", str(scene_dir / "cloud.ply"), str(unwrapped),
            "--resolution", "128", "-o", str(tmp_path / "lpm"),
        ])
        assert rc == 0 and (tmp_path / "lpm_albedo.png").exists()
        rc = main([
            "bake-remesh", str(scene_dir / "high.obj"), str(unwrapped),
            "--d-max", "0.5", "--resolution", "128", "-o", str(tmp_path / "rm"),
        ])
        assert rc == 0 and (tmp_path / "rm_albedo.png").exists()

    def test_bench_missing_manifest_field_exits_3(self, scene_dir, tmp_path, capsys):
        with open(scene_dir / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        del manifest["cloud"]
        broken = tmp_path / "broken.json"
        broken.write_text(json.dumps(manifest))
        rc = main(["bench", str(broken), "-o", str(tmp_path / "report")])
        assert rc == 3
        assert "cloud" in capsys.readouterr().err
