"""Baseline bakers to compare the point transfer against.

bake_lpm is the low-poly-only bake: vertex payload interpolated across each
chart, no cloud detail. It runs the exact same code path as the full bake
with gathering switched off, so the two are texel-identical whenever every
face gathers zero points.

bake_from_mesh is the classic remeshing route: it assumes someone already
built a dense colored mesh, and pulls every texel's payload from the closest
point on that mesh.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.spatial import cKDTree

from .assets import TriangleMesh, new_texel_grid, texel_center_uv
from .atlas import covered_texels
from .errors import DegenerateTriangle, MissingUVs, SchemaError
from .geometry import barycentric_2d_many
from .grid import build_face_grid, closest_on_soup
from .transfer import (
    BakeConfig,
    BakeResult,
    _bake_impl,
    _blend_normals,
    _clamp_bary,
    _dilate_gutter,
    _encode_normals,
)

__all__ = ["bake_lpm", "bake_from_mesh"]


def bake_lpm(mesh: TriangleMesh, cloud, cfg: BakeConfig, jobs: int = 1) -> BakeResult:
    """Vertex-interpolation bake: every texel gets the barycentric blend of
    its face's vertex payload. Shares bake_all's code with gathering off."""
    return _bake_impl(mesh, cloud, cfg, jobs, use_cloud=False)


def _face_normals(tris: np.ndarray) -> np.ndarray:
    n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    lens = np.linalg.norm(n, axis=1)
    if np.any(lens <= 2e-12):
        bad = int(np.argmin(lens))
        raise DegenerateTriangle(f"face {bad} has (near) zero area")
    return n / lens[:, None]


def _interp_payload(bary, vidx, colors, normals, fnormals, faces_hit):
    """Payload at closest-surface points: componentwise color blend and
    renormalized normal blend with the hit face's normal as zero-blend fallback."""
    rgb = np.einsum("mi,mic->mc", bary, colors[vidx])
    nbl = np.einsum("mi,mic->mc", bary, normals[vidx])
    norms = np.linalg.norm(nbl, axis=1)
    bad = norms < 1e-6
    out_n = np.empty_like(nbl)
    out_n[~bad] = nbl[~bad] / norms[~bad, None]
    out_n[bad] = fnormals[faces_hit[bad]]
    return rgb, out_n


def _closest_payload(queries, high, fgrid, seed_tree, colors, normals, fnormals):
    dist, face, bary, _ = closest_on_soup(fgrid, queries, seed_tree)
    vidx = high.faces[face]
    rgb, nrm = _interp_payload(bary, vidx, colors, normals, fnormals, face)
    return dist, rgb, nrm


def bake_from_mesh(high: TriangleMesh, low: TriangleMesh, cfg: BakeConfig, jobs: int = 1) -> BakeResult:
    """Remeshing-transfer baseline: bake low's maps by sampling the closest
    point on the high mesh for every texel.

    Texels whose closest point lies farther than cfg.d_max fall back to low's
    own vertex payload and are counted in the stats. When low carries no
    colors/normals, its vertex payload is itself sampled from the high mesh.
    """
    if low.uvs is None:
        raise MissingUVs("low mesh has no UV coordinates; run `unwrap` first to generate an atlas")
    if high.colors is None or high.normals is None:
        raise SchemaError("high mesh must carry per-vertex colors and normals to transfer from")
    high.validate()
    low.validate()
    t_start = time.perf_counter()

    res = cfg.resolution
    texture = new_texel_grid(res)
    normal_map = new_texel_grid(res)
    normal_map.data.fill(128)

    t0 = time.perf_counter()
    high_tris = high.face_triangles()
    high_fnormals = _face_normals(high_tris)
    fgrid = build_face_grid(high_tris)
    seed_tree = cKDTree(high_tris.mean(axis=1))
    grid_ms = (time.perf_counter() - t0) * 1e3

    high_colors = np.asarray(high.colors, dtype=np.float64)
    high_normals = np.asarray(high.normals, dtype=np.float64)

    t0 = time.perf_counter()
    if low.colors is not None and low.normals is not None:
        low_colors = np.asarray(low.colors, dtype=np.float64)
        low_normals = np.asarray(low.normals, dtype=np.float64)
    else:
        _, rgb, nrm = _closest_payload(
            low.vertices, high, fgrid, seed_tree, high_colors, high_normals, high_fnormals
        )
        low_colors = np.asarray(low.colors, dtype=np.float64) if low.colors is not None else rgb
        low_normals = np.asarray(low.normals, dtype=np.float64) if low.normals is not None else nrm
    payload_ms = (time.perf_counter() - t0) * 1e3

    low_tris = low.face_triangles()
    low_fnormals = _face_normals(low_tris)
    uvs = np.asarray(low.uvs, dtype=np.float64)
    nf = low_tris.shape[0]

    def face_job(fi: int):
        s0 = time.perf_counter()
        rows, cols = covered_texels(uvs[fi], res, res)
        if rows.size == 0:
            e = np.empty((0, 3), np.uint8)
            return rows, cols, e, e, 0, (0.0, 0.0)
        u, v = texel_center_uv(rows, cols, res, res)
        bary_uv = _clamp_bary(barycentric_2d_many(np.stack([u, v], axis=1), uvs[fi]))
        pos3d = bary_uv @ low_tris[fi]
        s1 = time.perf_counter()
        dist, rgb, nrm = _closest_payload(
            pos3d, high, fgrid, seed_tree, high_colors, high_normals, high_fnormals
        )
        s2 = time.perf_counter()

        far = dist > cfg.d_max
        n_far = int(np.count_nonzero(far))
        if n_far:
            li = low.faces[fi]
            rgb[far] = bary_uv[far] @ low_colors[li]
            nrm[far] = _blend_normals(bary_uv[far] @ low_normals[li], low_fnormals[fi])
        if not cfg.bake_normals:
            nrm = _blend_normals(bary_uv @ low_normals[low.faces[fi]], low_fnormals[fi])

        rgb_u8 = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
        nrm_u8 = _encode_normals(nrm)
        return rows, cols, rgb_u8, nrm_u8, n_far, (s1 - s0, s2 - s1)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(face_job, range(nf)))
    else:
        results = [face_job(fi) for fi in range(nf)]

    covered = 0
    fallback_texels = 0
    unmap_ms = 0.0
    closest_ms = 0.0
    for rows, cols, rgb_u8, nrm_u8, n_far, times in results:
        texture.data[rows, cols] = rgb_u8
        texture.coverage[rows, cols] = True
        normal_map.data[rows, cols] = nrm_u8
        normal_map.coverage[rows, cols] = True
        covered += int(rows.size)
        fallback_texels += n_far
        unmap_ms += times[0] * 1e3
        closest_ms += times[1] * 1e3

    t0 = time.perf_counter()
    dilated = _dilate_gutter([texture, normal_map], cfg.gutter)
    dilate_ms = (time.perf_counter() - t0) * 1e3

    stats = {
        "resolution": res,
        "faces": nf,
        "jobs": jobs,
        "counts": {
            "covered_texels": covered,
            "fallback_texels": fallback_texels,
            "dilated_texels": dilated,
            "high_faces": int(high.faces.shape[0]),
        },
        "stage_ms": {
            "face_grid_build": grid_ms,
            "low_payload": payload_ms,
            "unmap": unmap_ms,
            "closest_point": closest_ms,
            "dilate": dilate_ms,
            "total": (time.perf_counter() - t_start) * 1e3,
        },
    }
    return BakeResult(texture=texture, normal_map=normal_map, stats=stats)
