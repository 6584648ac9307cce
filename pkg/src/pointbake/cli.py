"""Command line entry points.

Thin sequential orchestration over the library: unwrap, bake (point cloud,
vertex-interpolated, or high-mesh transfer), render, compare, synth, bench.
Success is silent (except `compare`, which prints its metrics); every module
error becomes a one-line stderr diagnostic and a nonzero exit.

Exit codes: 0 ok, 2 usage, 3 bad data, 4 bad configuration.

Bake-family subcommands accept --stats to dump the library's stage counters
plus coarse epoch timestamps (load/work/io); the bench harness aligns its
memory sampler against those windows.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from .assets import read_image, read_mesh, read_pointcloud, write_image, write_mesh
from .atlas import unwrap_per_triangle
from .baselines import bake_from_mesh, bake_lpm
from .errors import ConfigError, DataError
from .metrics import format_psnr, psnr, rmse
from .render import Camera, render
from .synth import synth_scene, write_scene
from .transfer import BakeConfig, bake_all

__all__ = ["main"]


def _camera_spec(text: str):
    parts = text.split(",")
    if len(parts) != 7:
        raise argparse.ArgumentTypeError("camera must be x,y,z,lx,ly,lz,fov")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"camera has a non-numeric field: {text!r}")


def _size_spec(text: str):
    w, sep, h = text.lower().partition("x")
    if not sep:
        raise argparse.ArgumentTypeError("size must be WxH, e.g. 512x512")
    try:
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size has a non-integer field: {text!r}")


def _vector_spec(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric field: {text!r}")


def _add_bake_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d-max", type=float, default=4.0, help="gather distance cutoff")
    p.add_argument("--angle-max", type=float, default=120.0, help="normal angle cutoff, degrees")
    p.add_argument("--resolution", type=int, default=1024, help="texture side in texels")
    p.add_argument("--gutter", type=int, default=2, help="dilation rounds around charts")
    p.add_argument("--no-normals", action="store_true", help="skip the normal map")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for per-face work")
    p.add_argument("--stats", default=None, help="also write stage stats JSON here")
    p.add_argument("-o", "--output", required=True, help="output path prefix")


def _cfg_from(args) -> BakeConfig:
    return BakeConfig(
        d_max=args.d_max,
        angle_max_deg=args.angle_max,
        resolution=args.resolution,
        gutter=args.gutter,
        bake_normals=not args.no_normals,
    )


def _write_stats(path, stats: dict, windows: dict) -> None:
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"stats": stats, "epoch_windows": windows}, fh, indent=2)


def _finish_bake(args, result, t0: float, t1: float, t2: float) -> int:
    write_image(f"{args.output}_albedo.png", result.texture)
    if not args.no_normals:
        write_image(f"{args.output}_normal.png", result.normal_map)
    t3 = time.time()
    with open(f"{args.output}_stats.json", "w", encoding="utf-8") as fh:
        json.dump(result.stats, fh, indent=2)
    _write_stats(
        args.stats,
        result.stats,
        {"load": [t0, t1], "work": [t1, t2], "io": [t2, t3], "total": [t0, t3]},
    )
    return 0


def cmd_unwrap(args) -> int:
    t0 = time.time()
    mesh = read_mesh(args.mesh)
    t1 = time.time()
    atlas = unwrap_per_triangle(mesh, args.resolution, args.gutter)
    mesh.uvs = atlas.placements
    t2 = time.time()
    write_mesh(args.output, mesh)
    t3 = time.time()
    _write_stats(
        args.stats,
        {"resolution": atlas.resolution, "gutter": atlas.gutter, "scale": atlas.scale},
        {"load": [t0, t1], "work": [t1, t2], "io": [t2, t3], "total": [t0, t3]},
    )
    return 0


def cmd_bake(args) -> int:
    t0 = time.time()
    cloud = read_pointcloud(args.cloud)
    mesh = read_mesh(args.mesh)
    t1 = time.time()
    result = bake_all(mesh, cloud, _cfg_from(args), jobs=args.jobs)
    t2 = time.time()
    return _finish_bake(args, result, t0, t1, t2)


def cmd_bake_lpm(args) -> int:
    t0 = time.time()
    cloud = read_pointcloud(args.cloud)
    mesh = read_mesh(args.mesh)
    t1 = time.time()
    result = bake_lpm(mesh, cloud, _cfg_from(args), jobs=args.jobs)
    t2 = time.time()
    return _finish_bake(args, result, t0, t1, t2)


def cmd_bake_remesh(args) -> int:
    t0 = time.time()
    high = read_mesh(args.high)
    low = read_mesh(args.low)
    t1 = time.time()
    result = bake_from_mesh(high, low, _cfg_from(args), jobs=args.jobs)
    t2 = time.time()
    return _finish_bake(args, result, t0, t1, t2)


def cmd_render(args) -> int:
    mesh = read_mesh(args.mesh)
    texture = read_image(args.albedo)
    normal_map = read_image(args.normal_map) if args.normal_map else None
    x, y, z, lx, ly, lz, fov = args.camera
    w, h = args.size
    camera = Camera(position=(x, y, z), look_at=(lx, ly, lz), fov_deg=fov, width=w, height=h)
    frame = render(mesh, texture, normal_map, camera, args.light)
    write_image(args.output, frame.color)
    return 0


def cmd_compare(args) -> int:
    a = read_image(args.a)
    b = read_image(args.b)
    r = rmse(a, b)
    print(f"rmse={r:.6g} psnr={format_psnr(psnr(a, b))}")
    return 0


def cmd_synth(args) -> int:
    scene = synth_scene(
        args.kind, args.points, args.noise, seed=args.seed, high_detail=args.high_detail
    )
    write_scene(scene, args.output, resolution=args.resolution, gutter=args.gutter,
                reference=args.reference)
    return 0


def cmd_bench(args) -> int:
    from .bench import profile_pipeline

    profile_pipeline(args.manifest, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointbake",
        description="Bake point cloud color and normal detail onto low-poly mesh textures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("unwrap", help="give every triangle its own UV chart")
    p.add_argument("mesh", help="input OBJ")
    p.add_argument("--resolution", type=int, default=1024)
    p.add_argument("--gutter", type=int, default=2)
    p.add_argument("--stats", default=None, help="also write stage stats JSON here")
    p.add_argument("-o", "--output", required=True, help="output OBJ with UVs")
    p.set_defaults(func=cmd_unwrap)

    p = sub.add_parser("bake", help="bake texture and normal map from a point cloud")
    p.add_argument("cloud", help="input PLY point cloud")
    p.add_argument("mesh", help="unwrapped OBJ")
    _add_bake_flags(p)
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("bake-lpm", help="baseline: bake from vertex-interpolated colors")
    p.add_argument("cloud", help="input PLY point cloud")
    p.add_argument("mesh", help="unwrapped OBJ")
    _add_bake_flags(p)
    p.set_defaults(func=cmd_bake_lpm)

    p = sub.add_parser("bake-remesh", help="baseline: bake by sampling a dense colored mesh")
    p.add_argument("high", help="dense OBJ with vertex colors and normals")
    p.add_argument("low", help="unwrapped OBJ")
    _add_bake_flags(p)
    p.set_defaults(func=cmd_bake_remesh)

    p = sub.add_parser("render", help="rasterize a textured mesh to a PNG")
    p.add_argument("mesh", help="unwrapped OBJ")
    p.add_argument("albedo", help="texture PNG")
    p.add_argument("normal_map", nargs="?", default=None, help="optional normal map PNG")
    p.add_argument("--camera", type=_camera_spec, required=True,
                   help="x,y,z,lx,ly,lz,fov")
    p.add_argument("--size", type=_size_spec, default=(512, 512), help="WxH")
    p.add_argument("--light", type=_vector_spec, default=[-0.3, -0.4, -0.85],
                   help="directional light x,y,z")
    p.add_argument("-o", "--output", required=True, help="output PNG")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="print rmse and psnr between two PNGs")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    p.add_argument("kind", help="checker-plane | stripe-sphere | step-wall")
    p.add_argument("--points", type=int, default=100_000)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--high-detail", type=int, default=None,
                   help="override the high-mesh subdivision level")
    p.add_argument("--resolution", type=int, default=512, help="atlas size in the manifest")
    p.add_argument("--gutter", type=int, default=2)
    p.add_argument("--reference", default="analytic", choices=["analytic", "dense-render"])
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="profile all bake methods on a scene manifest")
    p.add_argument("manifest", help="manifest.json written by synth")
    p.add_argument("-o", "--output", required=True, help="report directory")
    p.set_defaults(func=cmd_bench)

    return parser


# flags whose values often start with a minus sign (coordinates); fold the
# value into --flag=value so argparse does not mistake it for an option
_VALUE_FLAGS = ("--camera", "--light")


def _fold_value_flags(argv: list[str]) -> list[str]:
    out = []
    i = 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_fold_value_flags(argv))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"pointbake: {exc}", file=sys.stderr)
        return 4
    except (DataError, IndexError, OSError) as exc:
        print(f"pointbake: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
