"""Stage-dissecting pipeline profiler.

Each bake method (direct point transfer, vertex-interpolated LPM, and
high-mesh remeshing transfer) runs as two fresh CLI subprocesses (unwrap,
then bake), so its wall time and peak resident set include everything the
method pays for: interpreter start, imports, and input parsing. The parent
polls the child's RSS at 100 Hz and windows the samples against the epoch
timestamps the CLI records per coarse stage.

Report directory contents:
  report.csv    rows of method,stage,wall_ms,peak_rss_bytes
                (stages: mesh_load, unwrap, bake, io, total)
  summary.json  per-camera RMSE/PSNR of each method against the reference
  frames/       rendered PNG per method and camera, plus the reference
"""
from __future__ import annotations

import csv
import json
import os
import subprocess
import sys
import time

import psutil

from .assets import read_image, read_mesh, write_image
from .errors import DataError, ManifestError
from .metrics import format_psnr, psnr, rmse
from .render import Camera, render
from .synth import bake_analytic
from .transfer import BakeConfig

__all__ = ["profile_pipeline"]

_SAMPLE_DT = 0.01  # 100 Hz target
_WINDOW_PAD = 0.015  # tolerate sampler/stage clock skew at window edges

_REQUIRED_FIELDS = ("cloud", "low_mesh", "cameras", "reference", "cfg", "light")
_REQUIRED_CFG = ("d_max", "angle_max_deg", "resolution", "gutter")


def _load_manifest(manifest_path: str) -> tuple[dict, str]:
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for field in _REQUIRED_FIELDS:
        if field not in manifest:
            raise ManifestError(f"manifest missing field '{field}'")
    for field in _REQUIRED_CFG:
        if field not in manifest["cfg"]:
            raise ManifestError(f"manifest cfg missing field '{field}'")
    if not manifest["cameras"]:
        raise ManifestError("manifest has an empty camera list")
    if manifest["reference"] not in ("analytic", "dense-render"):
        raise ManifestError(f"unknown reference kind {manifest['reference']!r}")
    if manifest["reference"] == "analytic" and ("kind" not in manifest or "params" not in manifest):
        raise ManifestError("analytic reference needs manifest fields 'kind' and 'params'")
    if manifest["reference"] == "dense-render" and "high_mesh" not in manifest:
        raise ManifestError("dense-render reference needs manifest field 'high_mesh'")
    base = os.path.dirname(os.path.abspath(manifest_path))
    return manifest, base


def _run_profiled(cmd: list[str]):
    """Run one CLI subprocess, sampling its RSS. Returns (samples, t0, t1)."""
    t0 = time.time()
    proc = subprocess.Popen(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
    samples: list[tuple[float, int]] = []
    try:
        tracker = psutil.Process(proc.pid)
        while proc.poll() is None:
            try:
                samples.append((time.time(), tracker.memory_info().rss))
            except psutil.Error:
                break
            time.sleep(_SAMPLE_DT)
    finally:
        _, err = proc.communicate()
    t1 = time.time()
    if proc.returncode != 0:
        detail = err.decode("utf-8", errors="replace").strip().splitlines()
        raise DataError(
            f"profiled subprocess failed (exit {proc.returncode}): "
            f"{' '.join(cmd[3:])}: {detail[-1] if detail else 'no diagnostic'}"
        )
    return samples, t0, t1


def _window_peak(samples, window) -> int:
    lo, hi = window[0] - _WINDOW_PAD, window[1] + _WINDOW_PAD
    return max((rss for t, rss in samples if lo <= t <= hi), default=0)


def _read_windows(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)["epoch_windows"]


def _ms(window) -> float:
    return (window[1] - window[0]) * 1000.0


def profile_pipeline(manifest_path: str, out_dir: str) -> dict:
    """Profile every method named by the manifest and write the report files.
    Returns the summary dict."""
    manifest, base = _load_manifest(manifest_path)
    os.makedirs(out_dir, exist_ok=True)
    frames_dir = os.path.join(out_dir, "frames")
    os.makedirs(frames_dir, exist_ok=True)

    cloud_path = os.path.join(base, manifest["cloud"])
    low_path = os.path.join(base, manifest["low_mesh"])
    high_path = (
        os.path.join(base, manifest["high_mesh"]) if "high_mesh" in manifest else None
    )
    for path in filter(None, (cloud_path, low_path, high_path)):
        if not os.path.exists(path):
            raise ManifestError(f"manifest references a missing file: {path}")
    cfg = manifest["cfg"]
    res = str(cfg["resolution"])
    gutter = str(cfg["gutter"])
    unwrapped = os.path.join(out_dir, "unwrapped.obj")

    methods = ["point", "lpm"] + (["remesh"] if high_path else [])
    bake_cmd = {
        "point": ["bake", cloud_path, unwrapped],
        "lpm": ["bake-lpm", cloud_path, unwrapped],
        "remesh": ["bake-remesh", high_path or "", unwrapped],
    }

    rows = []
    totals_ms: dict[str, float] = {}
    totals_rss: dict[str, int] = {}
    sampler_counts: dict[str, int] = {}
    for method in methods:
        un_stats = os.path.join(out_dir, f"{method}_unwrap_windows.json")
        un_cmd = [
            sys.executable, "-m", "pointbake.cli",
            "unwrap", low_path, "--resolution", res, "--gutter", gutter,
            "--stats", un_stats, "-o", unwrapped,
        ]
        un_samples, un_t0, un_t1 = _run_profiled(un_cmd)
        un_win = _read_windows(un_stats)

        bk_stats = os.path.join(out_dir, f"{method}_windows.json")
        bk_cmd = [
            sys.executable, "-m", "pointbake.cli",
            *bake_cmd[method],
            "--d-max", str(cfg["d_max"]), "--angle-max", str(cfg["angle_max_deg"]),
            "--resolution", res, "--gutter", gutter, "--jobs", "1",
            "--stats", bk_stats, "-o", os.path.join(out_dir, method),
        ]
        bk_samples, bk_t0, bk_t1 = _run_profiled(bk_cmd)
        bk_win = _read_windows(bk_stats)

        stage_rows = {
            "mesh_load": (
                _ms(un_win["load"]) + _ms(bk_win["load"]),
                max(_window_peak(un_samples, un_win["load"]),
                    _window_peak(bk_samples, bk_win["load"])),
            ),
            "unwrap": (_ms(un_win["work"]), _window_peak(un_samples, un_win["work"])),
            "bake": (_ms(bk_win["work"]), _window_peak(bk_samples, bk_win["work"])),
            "io": (
                _ms(un_win["io"]) + _ms(bk_win["io"]),
                max(_window_peak(un_samples, un_win["io"]),
                    _window_peak(bk_samples, bk_win["io"])),
            ),
            "total": (
                (un_t1 - un_t0 + bk_t1 - bk_t0) * 1000.0,
                max((rss for _, rss in un_samples + bk_samples), default=0),
            ),
        }
        for stage, (wall_ms, peak) in stage_rows.items():
            rows.append([method, stage, f"{wall_ms:.3f}", peak])
        totals_ms[method] = stage_rows["total"][0]
        totals_rss[method] = stage_rows["total"][1]
        sampler_counts[method] = len(un_samples) + len(bk_samples)

    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "stage", "wall_ms", "peak_rss_bytes"])
        writer.writerows(rows)

    summary = _score_methods(manifest, base, out_dir, frames_dir, methods)
    summary["wall_ms"] = totals_ms
    summary["peak_rss_bytes"] = totals_rss
    summary["sampler"] = {"target_hz": round(1.0 / _SAMPLE_DT), "samples": sampler_counts}
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def _score_methods(manifest, base, out_dir, frames_dir, methods) -> dict:
    """Render each method's maps from every manifest camera and score them
    against the reference frames (in-process; not part of the timings)."""
    low = read_mesh(os.path.join(out_dir, "unwrapped.obj"))
    cameras = [Camera(**c) for c in manifest["cameras"]]
    light = manifest["light"]

    reference_frames = []
    if manifest["reference"] == "analytic":
        cfg = manifest["cfg"]
        bake_cfg = BakeConfig(
            d_max=cfg["d_max"], angle_max_deg=cfg["angle_max_deg"],
            resolution=cfg["resolution"], gutter=cfg["gutter"],
        )
        gt_tex, gt_nrm = bake_analytic(low, bake_cfg, manifest["kind"], manifest["params"])
        for ci, cam in enumerate(cameras):
            frame = render(low, gt_tex, gt_nrm, cam, light).color
            write_image(os.path.join(frames_dir, f"reference_cam{ci}.png"), frame)
            reference_frames.append(frame)
    else:
        high = read_mesh(os.path.join(base, manifest["high_mesh"]))
        for ci, cam in enumerate(cameras):
            frame = render(high, None, None, cam, light).color
            write_image(os.path.join(frames_dir, f"reference_cam{ci}.png"), frame)
            reference_frames.append(frame)

    summary = {"reference": manifest["reference"], "methods": {}}
    for method in methods:
        texture = read_image(os.path.join(out_dir, f"{method}_albedo.png"))
        normal_path = os.path.join(out_dir, f"{method}_normal.png")
        normal_map = read_image(normal_path) if os.path.exists(normal_path) else None
        frames = []
        for ci, (cam, ref) in enumerate(zip(cameras, reference_frames)):
            frame = render(low, texture, normal_map, cam, light).color
            write_image(os.path.join(frames_dir, f"{method}_cam{ci}.png"), frame)
            p = psnr(ref, frame)
            frames.append({
                "rmse": rmse(ref, frame),
                "psnr_db": None if p == float("inf") else p,
                "psnr": format_psnr(p),
            })
        summary["methods"][method] = {"frames": frames}
    return summary
