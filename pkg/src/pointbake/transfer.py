"""Point-to-texture detail transfer.

The pipeline works one mesh face at a time: gather cloud points near the
face, map them into its UV chart with unchanged barycentric coordinates,
triangulate the chart over the mapped sites, then rasterize every texel of
the chart by interpolating inside its containing sub-triangle. Vertex
payloads anchor the chart corners so faces with no nearby points degrade to
plain vertex interpolation.

All steps are pure and deterministic; bake_all may fan faces out to worker
threads because charts own disjoint texel regions.
"""
from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.spatial import Delaunay, cKDTree
from scipy.spatial import QhullError

from .assets import PointCloud, TexelGrid, TriangleMesh, new_texel_grid, texel_center_uv
from .atlas import covered_texels
from .errors import ConfigError, DegenerateTriangle, MissingUVs
from .geometry import (
    barycentric_2d_many,
    barycentric_of_many,
    closest_on_triangles,
    normal_angles_deg,
    triangle_normal,
)
from .grid import UniformGrid, build_grid, candidates_near_triangle, k_nearest

__all__ = [
    "BakeConfig",
    "MappedPoint",
    "MappedPoints",
    "PatchTriangulation",
    "BakeResult",
    "gather_points",
    "map_points",
    "triangulate_patch",
    "compute_vertex_payload",
    "bake_face",
    "bake_all",
]

# barycentric weights this far below zero still count as "projects inside";
# anything lower is discarded as belonging to a neighboring face
_WEIGHT_TOL = 1e-9


@dataclasses.dataclass
class BakeConfig:
    d_max: float = 4.0  # scene units; tune to a few multiples of point spacing
    angle_max_deg: float = 120.0
    resolution: int = 1024
    gutter: int = 2
    bake_normals: bool = True
    vertex_attr_k: int = 8

    def __post_init__(self) -> None:
        if not self.d_max > 0.0:
            raise ConfigError(f"d_max must be positive, got {self.d_max}")
        if not 0.0 < self.angle_max_deg <= 180.0:
            raise ConfigError(f"angle_max_deg must be in (0, 180], got {self.angle_max_deg}")
        if self.resolution < 64:
            raise ConfigError(f"resolution must be >= 64, got {self.resolution}")
        if self.gutter < 1:
            raise ConfigError(f"gutter must be >= 1, got {self.gutter}")
        if self.vertex_attr_k < 1:
            raise ConfigError(f"vertex_attr_k must be >= 1, got {self.vertex_attr_k}")


@dataclasses.dataclass
class MappedPoint:
    uv: np.ndarray  # (2,)
    color: np.ndarray  # (3,) float64 in 0..255
    normal: np.ndarray  # (3,) unit
    source_index: int


@dataclasses.dataclass
class MappedPoints:
    """Struct-of-arrays batch of MappedPoint, in ascending source order."""

    uv: np.ndarray  # (k, 2)
    colors: np.ndarray  # (k, 3) float64
    normals: np.ndarray  # (k, 3)
    source_indices: np.ndarray  # (k,) int64

    def __len__(self) -> int:
        return self.uv.shape[0]

    def __getitem__(self, i: int) -> MappedPoint:
        return MappedPoint(self.uv[i], self.colors[i], self.normals[i], int(self.source_indices[i]))


def _empty_mapped() -> MappedPoints:
    return MappedPoints(
        uv=np.empty((0, 2)),
        colors=np.empty((0, 3)),
        normals=np.empty((0, 3)),
        source_indices=np.empty(0, dtype=np.int64),
    )


@dataclasses.dataclass
class PatchTriangulation:
    """Chart triangulation: sites are the 3 UV corners followed by the
    surviving interior sites; sub_triangles index into sites (CCW)."""

    sites_uv: np.ndarray  # (3 + k, 2)
    interior_colors: np.ndarray  # (k, 3) float64
    interior_normals: np.ndarray  # (k, 3)
    sub_triangles: np.ndarray  # (2k + 1, 3) int64 for strictly interior sites
    deduped_sites: int
    _locator: Delaunay | None = None  # None when k == 0

    @property
    def interior_count(self) -> int:
        return self.sites_uv.shape[0] - 3


@dataclasses.dataclass
class BakeResult:
    texture: TexelGrid
    normal_map: TexelGrid
    stats: dict


def gather_points(t: np.ndarray, cloud: PointCloud, grid: UniformGrid, cfg: BakeConfig) -> np.ndarray:
    """Indices (ascending) of cloud points within d_max of the face whose
    normals lie within angle_max of the face normal. Both thresholds inclusive."""
    t = np.asarray(t, dtype=np.float64)
    cand = candidates_near_triangle(grid, t, cfg.d_max)
    if cand.size == 0:
        return cand
    _, dist, _ = closest_on_triangles(cloud.positions[cand], t)
    keep = dist <= cfg.d_max
    cand = cand[keep]
    if cand.size == 0:
        return cand
    angles = normal_angles_deg(cloud.normals[cand], triangle_normal(t))
    cand = cand[angles <= cfg.angle_max_deg]
    return np.sort(cand)


def map_points(t: np.ndarray, indices: np.ndarray, cloud: PointCloud, uv_tri: np.ndarray) -> MappedPoints:
    """Carry each gathered point into UV space with its barycentric weights
    unchanged. Points whose projection falls outside the face (any weight
    below -1e-9) are dropped; small negatives are clamped and renormalized."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return _empty_mapped()
    b = barycentric_of_many(cloud.positions[indices], np.asarray(t, dtype=np.float64))
    inside = np.all(b >= -_WEIGHT_TOL, axis=1)
    indices = indices[inside]
    if indices.size == 0:
        return _empty_mapped()
    b = np.clip(b[inside], 0.0, 1.0)
    b /= b.sum(axis=1, keepdims=True)
    uv = b @ np.asarray(uv_tri, dtype=np.float64)
    return MappedPoints(
        uv=uv,
        colors=cloud.colors[indices].astype(np.float64),
        normals=cloud.normals[indices].copy(),
        source_indices=indices,
    )


def _dedup_sites(uv_tri: np.ndarray, mapped: MappedPoints, eps: float) -> np.ndarray:
    """Keep-mask over mapped sites: a site within eps of a chart corner or of
    an earlier kept site is dropped (earliest index wins; corners always win)."""
    n = 3 + len(mapped)
    pts = np.vstack([uv_tri, mapped.uv])
    keep = np.ones(n, dtype=bool)
    pairs = cKDTree(pts).query_pairs(eps, output_type="ndarray")
    if pairs.size:
        order = np.lexsort((pairs[:, 0], pairs[:, 1]))
        for i, j in pairs[order]:
            if keep[i]:
                keep[j] = False
    keep[:3] = True
    return keep[3:]


def triangulate_patch(uv_tri: np.ndarray, mapped: MappedPoints, resolution: int) -> PatchTriangulation:
    """Delaunay triangulation of the chart corners plus the mapped interior
    sites. Near-coincident sites (closer than a thousandth of a texel) are
    deduplicated toward the lowest source index. With k interior sites the
    result has 2k + 1 sub-triangles."""
    uv_tri = np.asarray(uv_tri, dtype=np.float64)
    eps = 1e-3 / resolution
    keep = _dedup_sites(uv_tri, mapped, eps) if len(mapped) else np.empty(0, bool)
    deduped = int(np.count_nonzero(~keep))
    interior_uv = mapped.uv[keep]
    interior_colors = mapped.colors[keep]
    interior_normals = mapped.normals[keep]

    # qhull may still refuse a site (precision merges); re-run on the
    # survivors so sites and triangulation vertices match exactly
    locator = None
    while interior_uv.shape[0] > 0:
        sites = np.vstack([uv_tri, interior_uv])
        try:
            locator = Delaunay(sites)
        except QhullError as e:
            raise DegenerateTriangle(f"chart too degenerate to triangulate: {e}") from e
        used = np.unique(locator.simplices)
        if used.size == sites.shape[0]:
            break
        mask = np.zeros(sites.shape[0], dtype=bool)
        mask[used] = True
        if not mask[:3].all():
            raise DegenerateTriangle("chart corner collapsed during triangulation")
        deduped += int(np.count_nonzero(~mask))
        interior_uv = interior_uv[mask[3:]]
        interior_colors = interior_colors[mask[3:]]
        interior_normals = interior_normals[mask[3:]]
        locator = None

    if interior_uv.shape[0] == 0:
        return PatchTriangulation(
            sites_uv=uv_tri.copy(),
            interior_colors=np.empty((0, 3)),
            interior_normals=np.empty((0, 3)),
            sub_triangles=np.array([[0, 1, 2]], dtype=np.int64),
            deduped_sites=deduped,
            _locator=None,
        )

    sites = locator.points
    simplices = locator.simplices.astype(np.int64)
    # store sub-triangles CCW for a stable public representation
    a, b, c = sites[simplices[:, 0]], sites[simplices[:, 1]], sites[simplices[:, 2]]
    signed = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = signed < 0.0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    return PatchTriangulation(
        sites_uv=sites,
        interior_colors=interior_colors,
        interior_normals=interior_normals,
        sub_triangles=simplices,
        deduped_sites=deduped,
        _locator=locator,
    )


def compute_vertex_payload(mesh: TriangleMesh, cloud: PointCloud, grid: UniformGrid, cfg: BakeConfig):
    """Per-vertex (colors, normals), each (nv, 3) float64.

    Mesh-provided attributes are used verbatim, independently per attribute;
    missing ones come from an inverse-distance-weighted average of the
    vertex's k nearest cloud points (exact neighbors, ties to lower index)."""
    nv = mesh.n_vertices
    need_colors = mesh.colors is None
    need_normals = mesh.normals is None
    colors = None if need_colors else np.asarray(mesh.colors, dtype=np.float64)
    normals = None if need_normals else np.asarray(mesh.normals, dtype=np.float64)
    if not (need_colors or need_normals):
        return colors, normals

    idw_colors = np.empty((nv, 3)) if need_colors else None
    idw_normals = np.empty((nv, 3)) if need_normals else None
    cloud_colors = cloud.colors.astype(np.float64)
    for vi in range(nv):
        idx = k_nearest(grid, mesh.vertices[vi], cfg.vertex_attr_k)
        d = np.linalg.norm(cloud.positions[idx] - mesh.vertices[vi], axis=1)
        w = 1.0 / np.maximum(d, 1e-12)
        w /= w.sum()
        if need_colors:
            idw_colors[vi] = w @ cloud_colors[idx]
        if need_normals:
            n = w @ cloud.normals[idx]
            norm = np.linalg.norm(n)
            idw_normals[vi] = n / norm if norm > 1e-6 else cloud.normals[idx[0]]
    return (
        idw_colors if need_colors else colors,
        idw_normals if need_normals else normals,
    )


def _blend_normals(blended: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Renormalize linearly blended normals; zero blends (opposite inputs
    cancelling) fall back to the face normal."""
    norms = np.linalg.norm(blended, axis=1)
    bad = norms < 1e-6
    out = np.empty_like(blended)
    out[~bad] = blended[~bad] / norms[~bad, None]
    out[bad] = fallback
    return out


def _encode_normals(units: np.ndarray) -> np.ndarray:
    return np.clip(np.rint((units + 1.0) * 0.5 * 255.0), 0, 255).astype(np.uint8)


def _clamp_bary(b: np.ndarray) -> np.ndarray:
    b = np.clip(b, 0.0, 1.0)
    s = b.sum(axis=1, keepdims=True)
    s[s == 0.0] = 1.0
    return b / s


def _rasterize_face(
    face_uv: np.ndarray,
    face_normal: np.ndarray,
    patch: PatchTriangulation,
    corner_colors: np.ndarray,
    corner_normals: np.ndarray,
    cfg: BakeConfig,
):
    """Arrays for one face: (rows, cols, rgb u8, normal u8, sliver count)."""
    res = cfg.resolution
    rows, cols = covered_texels(face_uv, res, res)
    if rows.size == 0:
        return rows, cols, np.empty((0, 3), np.uint8), np.empty((0, 3), np.uint8), 0

    u, v = texel_center_uv(rows, cols, res, res)
    pts = np.stack([u, v], axis=1)
    site_colors = np.vstack([corner_colors, patch.interior_colors])
    site_normals = np.vstack([corner_normals, patch.interior_normals])

    slivers = 0
    if patch._locator is None:
        bary = _clamp_bary(barycentric_2d_many(pts, face_uv))
        rgb = bary @ site_colors[:3]
        nblend = bary @ site_normals[:3]
    else:
        loc = patch._locator
        simp = loc.find_simplex(pts)
        ok = simp >= 0
        rgb = np.empty((pts.shape[0], 3))
        nblend = np.empty((pts.shape[0], 3))
        if np.any(ok):
            X = loc.transform[simp[ok]]
            d = pts[ok] - X[:, 2]
            b01 = np.einsum("mij,mj->mi", X[:, :2], d)
            bary = _clamp_bary(np.concatenate([b01, 1.0 - b01.sum(axis=1, keepdims=True)], axis=1))
            vidx = loc.simplices[simp[ok]]
            rgb[ok] = np.einsum("mi,mic->mc", bary, site_colors[vidx])
            nblend[ok] = np.einsum("mi,mic->mc", bary, site_normals[vidx])
        if np.any(~ok):
            # texel center squeezed out of every sub-triangle by roundoff:
            # copy the nearest site's payload and count it
            slivers = int(np.count_nonzero(~ok))
            _, nearest = cKDTree(patch.sites_uv).query(pts[~ok])
            rgb[~ok] = site_colors[nearest]
            nblend[~ok] = site_normals[nearest]

    if not cfg.bake_normals:
        bary_face = _clamp_bary(barycentric_2d_many(pts, face_uv))
        nblend = bary_face @ corner_normals

    rgb_u8 = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    normal_u8 = _encode_normals(_blend_normals(nblend, face_normal))
    return rows, cols, rgb_u8, normal_u8, slivers


def bake_face(
    face_uv: np.ndarray,
    face_normal: np.ndarray,
    patch: PatchTriangulation,
    corner_colors: np.ndarray,
    corner_normals: np.ndarray,
    texture: TexelGrid,
    normal_map: TexelGrid,
    cfg: BakeConfig,
) -> dict:
    """Write one face's texels into the shared maps. Returns a tally of
    texels written and sliver fallbacks."""
    rows, cols, rgb_u8, normal_u8, slivers = _rasterize_face(
        face_uv, face_normal, patch, corner_colors, corner_normals, cfg
    )
    texture.data[rows, cols] = rgb_u8
    texture.coverage[rows, cols] = True
    normal_map.data[rows, cols] = normal_u8
    normal_map.coverage[rows, cols] = True
    return {"texels": int(rows.size), "slivers": slivers}


_SHIFT_ORDER = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _dilate_gutter(grids: list[TexelGrid], gutter: int) -> int:
    """Fill each uncovered texel within `gutter` chessboard steps of coverage
    with its nearest covered texel's value (fixed neighbor order breaks ties).
    Works on a coverage copy; the grids' own coverage is left untouched.
    Returns the number of texels filled."""
    work = grids[0].coverage.copy()
    h, w = work.shape
    total = 0
    for _ in range(gutter):
        new_mask = np.zeros_like(work)
        for dr, dc in _SHIFT_ORDER:
            dst_r = slice(max(0, -dr), h - max(0, dr))
            dst_c = slice(max(0, -dc), w - max(0, dc))
            src_r = slice(max(0, dr), h - max(0, -dr))
            src_c = slice(max(0, dc), w - max(0, -dc))
            shifted_cov = np.zeros_like(work)
            shifted_cov[dst_r, dst_c] = work[src_r, src_c]
            fill = shifted_cov & ~work & ~new_mask
            if not np.any(fill):
                continue
            for g in grids:
                moved = np.zeros_like(g.data)
                moved[dst_r, dst_c] = g.data[src_r, src_c]
                g.data[fill] = moved[fill]
            new_mask |= fill
        if not np.any(new_mask):
            break
        work |= new_mask
        total += int(np.count_nonzero(new_mask))
    return total


def _bake_impl(mesh: TriangleMesh, cloud: PointCloud, cfg: BakeConfig, jobs: int, use_cloud: bool) -> BakeResult:
    if mesh.uvs is None:
        raise MissingUVs("mesh has no UV coordinates; run `unwrap` first to generate an atlas")
    mesh.validate()
    cloud.validate()
    t_start = time.perf_counter()
    res = cfg.resolution
    texture = new_texel_grid(res)
    normal_map = new_texel_grid(res)
    # mid-gray background decodes to a near-zero vector, which renderers
    # treat as "no baked normal here"
    normal_map.data.fill(128)

    t0 = time.perf_counter()
    extent = float(np.max(cloud.positions.max(axis=0) - cloud.positions.min(axis=0)))
    cell = max(2.0 * cfg.d_max, extent / 128.0)
    grid = build_grid(cloud.positions, cell)
    grid_ms = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    vert_colors, vert_normals = compute_vertex_payload(mesh, cloud, grid, cfg)
    payload_ms = (time.perf_counter() - t0) * 1e3

    tris = mesh.face_triangles()
    uvs = np.asarray(mesh.uvs, dtype=np.float64)
    nf = tris.shape[0]
    empty_idx = np.empty(0, dtype=np.int64)

    def face_job(fi: int):
        t = tris[fi]
        face_uv = uvs[fi]
        fnorm = triangle_normal(t)
        s0 = time.perf_counter()
        idx = gather_points(t, cloud, grid, cfg) if use_cloud else empty_idx
        s1 = time.perf_counter()
        mapped = map_points(t, idx, cloud, face_uv) if idx.size else _empty_mapped()
        s2 = time.perf_counter()
        patch = triangulate_patch(face_uv, mapped, res)
        s3 = time.perf_counter()
        arrays = _rasterize_face(
            face_uv, fnorm, patch, vert_colors[mesh.faces[fi]], vert_normals[mesh.faces[fi]], cfg
        )
        s4 = time.perf_counter()
        counts = (idx.size, len(mapped), patch.deduped_sites)
        return arrays, counts, (s1 - s0, s2 - s1, s3 - s2, s4 - s3)

    stage = {"gather": 0.0, "map": 0.0, "triangulate": 0.0, "rasterize": 0.0}
    points_gathered = 0
    points_transferred = 0
    deduped = 0
    slivers = 0
    faces_no_points = 0

    t0 = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(face_job, range(nf)))
    else:
        results = [face_job(fi) for fi in range(nf)]
    # apply in face order; charts are disjoint so the order is cosmetic
    for (rows, cols, rgb_u8, normal_u8, face_slivers), counts, times in results:
        texture.data[rows, cols] = rgb_u8
        texture.coverage[rows, cols] = True
        normal_map.data[rows, cols] = normal_u8
        normal_map.coverage[rows, cols] = True
        slivers += face_slivers
        points_gathered += counts[0]
        points_transferred += counts[1]
        deduped += counts[2]
        if counts[0] == 0:
            faces_no_points += 1
        for key, dt in zip(("gather", "map", "triangulate", "rasterize"), times):
            stage[key] += dt * 1e3
    faces_ms = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    dilated = _dilate_gutter([texture, normal_map], cfg.gutter)
    dilate_ms = (time.perf_counter() - t0) * 1e3

    stats = {
        "resolution": res,
        "faces": nf,
        "jobs": jobs,
        "counts": {
            "points_gathered": points_gathered,
            "points_transferred": points_transferred,
            "deduped_sites": deduped,
            "sliver_texels": slivers,
            "faces_no_points": faces_no_points,
            "covered_texels": int(np.count_nonzero(texture.coverage)),
            "dilated_texels": dilated,
        },
        "stage_ms": {
            "grid_build": grid_ms,
            "vertex_payload": payload_ms,
            "gather": stage["gather"],
            "map": stage["map"],
            "triangulate": stage["triangulate"],
            "rasterize": stage["rasterize"],
            "faces_wall": faces_ms,
            "dilate": dilate_ms,
            "total": (time.perf_counter() - t_start) * 1e3,
        },
    }
    return BakeResult(texture=texture, normal_map=normal_map, stats=stats)


def bake_all(mesh: TriangleMesh, cloud: PointCloud, cfg: BakeConfig, jobs: int = 1) -> BakeResult:
    """Full bake: per-face gather/map/triangulate/rasterize, then gutter
    dilation. Deterministic for any jobs count."""
    return _bake_impl(mesh, cloud, cfg, jobs, use_cloud=True)
