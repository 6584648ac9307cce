"""Per-triangle UV atlas: every face becomes its own chart.

Each 3D face is embedded isometrically into 2D (first edge along +x, third
vertex above it, so winding is preserved), every chart is scaled by the SAME
global factor, and charts are shelf-packed in order of decreasing height
(face index breaks ties, sort is stable). One global scale keeps the UV/3D
area ratio constant across faces, which the bake relies on for uniform texel
density.

Charts are padded with (gutter + 1) texels of margin on every side; adjacent
charts therefore keep a 2*(gutter+1) texel gap, so gutter-dilated charts can
never collide and stay inside [0,1]^2 by at least one texel.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .assets import TriangleMesh, texel_center_uv
from .errors import AtlasOverflow, ConfigError, DegenerateTriangle
from .geometry import barycentric_2d_many, signed_area_2d

__all__ = [
    "UVAtlas",
    "AtlasReport",
    "unwrap_per_triangle",
    "validate_atlas",
    "covered_texels",
]


@dataclasses.dataclass
class UVAtlas:
    placements: np.ndarray  # (nf, 3, 2) UV corners per face
    resolution: int
    gutter: int
    scale: float  # UV units per scene unit


@dataclasses.dataclass
class AtlasReport:
    occupancy: float  # covered texels (pre-dilation) / resolution^2
    overlap_texels: int
    overlap_faces: list  # sorted (face_a, face_b) pairs that collide after dilation
    out_of_bounds: list  # faces whose placement leaves [0,1]^2

    @property
    def violations(self) -> list:
        out = [f"faces {a} and {b} overlap after gutter dilation" for a, b in self.overlap_faces]
        out += [f"face {fi} placed outside the unit square" for fi in self.out_of_bounds]
        return out


def _embed_face(tri: np.ndarray, face_idx: int) -> np.ndarray:
    """Isometric 2D embedding: v0 at origin, v1 on +x, v2 at positive y."""
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    x = float(np.linalg.norm(e1))
    if x < 1e-300:
        raise DegenerateTriangle(f"face {face_idx} has a zero-length edge")
    u1 = e1 / x
    proj = float(e2 @ u1)
    perp = e2 - proj * u1
    y = float(np.linalg.norm(perp))
    if 0.5 * x * y <= 1e-12:
        raise DegenerateTriangle(f"face {face_idx} is degenerate (area {0.5 * x * y:g})")
    return np.array([[0.0, 0.0], [x, 0.0], [proj, y]])


def _shelf_pack(boxes_w: np.ndarray, boxes_h: np.ndarray, order: np.ndarray):
    """Place boxes (in the given order) on left-to-right shelves inside the
    unit square. Returns (n, 2) min corners or None if they do not fit."""
    pos = np.empty((order.size, 2), dtype=np.float64)
    shelf_y = 0.0
    shelf_h = 0.0
    cur_x = 0.0
    for idx in order:
        bw = boxes_w[idx]
        bh = boxes_h[idx]
        if bw > 1.0 or bh > 1.0:
            return None
        if cur_x + bw > 1.0:
            shelf_y += shelf_h
            cur_x = 0.0
            shelf_h = 0.0
        if shelf_y + bh > 1.0:
            return None
        pos[idx] = (cur_x, shelf_y)
        cur_x += bw
        shelf_h = max(shelf_h, bh)
    return pos


def _pack_at_scale(local, mins, widths, heights, order, scale, margin):
    bw = widths * scale + 2.0 * margin
    bh = heights * scale + 2.0 * margin
    return _shelf_pack(bw, bh, order)


def unwrap_per_triangle(mesh: TriangleMesh, resolution: int, gutter: int) -> UVAtlas:
    """Compute a per-face chart atlas for the mesh.

    Deterministic: identical meshes and parameters give identical atlases.
    Raises AtlasOverflow (carrying the minimum feasible resolution) when the
    chart margins alone exceed the packing capacity.
    """
    if resolution < 64:
        raise ConfigError(f"atlas resolution must be >= 64, got {resolution}")
    if gutter < 1:
        raise ConfigError(f"gutter must be >= 1 texel, got {gutter}")
    tris = mesh.face_triangles()
    nf = tris.shape[0]
    if nf == 0:
        raise ConfigError("mesh has no faces to unwrap")

    local = np.empty((nf, 3, 2), dtype=np.float64)
    for fi in range(nf):
        local[fi] = _embed_face(tris[fi], fi)
    mins = np.minimum(local[:, 2, 0], 0.0)  # only v2.x can be negative
    widths = np.maximum(local[:, 1, 0], local[:, 2, 0]) - mins
    heights = local[:, 2, 1]

    margin = (gutter + 1) / resolution
    # sort by unscaled height descending, stable in face index; scale does not
    # change the order, so the search reuses one ordering
    order = np.argsort(-heights, kind="stable")

    eps = _eps_scale(widths, heights, gutter, resolution)
    if eps is None or _pack_at_scale(local, mins, widths, heights, order, eps, margin) is None:
        min_res = _min_feasible_resolution(widths, heights, order, gutter, resolution)
        raise AtlasOverflow(resolution, min_res)

    # bisect between the known-feasible epsilon and the single-chart bound;
    # lo stays feasible throughout, so the final re-pack cannot fail
    hi = (1.0 - 2.0 * margin) / float(max(widths.max(), heights.max()))
    lo = eps
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _pack_at_scale(local, mins, widths, heights, order, mid, margin) is not None:
            lo = mid
        else:
            hi = mid
    scale = lo
    pos = _pack_at_scale(local, mins, widths, heights, order, scale, margin)
    assert pos is not None

    placements = local * scale
    placements[:, :, 0] += (pos[:, 0] + margin - mins * scale)[:, None]
    placements[:, :, 1] += (pos[:, 1] + margin)[:, None]
    return UVAtlas(placements=placements, resolution=resolution, gutter=gutter, scale=scale)


def _eps_scale(widths, heights, gutter: int, resolution: int):
    """Tiny positive probe scale, or None when margins already exceed the square."""
    margin = (gutter + 1) / resolution
    span = 1.0 - 2.0 * margin
    if span <= 0.0:
        return None
    return 1e-6 * span / float(max(widths.max(), heights.max()))


def _feasible(widths, heights, order, gutter: int, resolution: int) -> bool:
    """Whether the packer succeeds at this resolution for SOME positive scale."""
    eps = _eps_scale(widths, heights, gutter, resolution)
    if eps is None:
        return False
    margin = (gutter + 1) / resolution
    bw = widths * eps + 2.0 * margin
    bh = heights * eps + 2.0 * margin
    return _shelf_pack(bw, bh, order) is not None


def _min_feasible_resolution(widths, heights, order, gutter: int, resolution: int) -> int:
    """Smallest resolution at which the same charts pack, found by doubling
    then bisecting with the actual packer."""
    hi = max(resolution, 64)
    while not _feasible(widths, heights, order, gutter, hi):
        hi *= 2
        if hi > 1 << 24:
            raise AtlasOverflow(resolution, hi)
    lo = 64
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(widths, heights, order, gutter, mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def covered_texels(uv_tri: np.ndarray, width: int, height: int):
    """(rows, cols) of texels whose CENTER lies inside the UV triangle
    (boundary inclusive). Restricted to the texel grid."""
    u_lo, v_lo = uv_tri.min(axis=0)
    u_hi, v_hi = uv_tri.max(axis=0)
    c0 = max(int(np.floor(u_lo * width - 0.5)), 0)
    c1 = min(int(np.ceil(u_hi * width + 0.5)), width - 1)
    r0 = max(int(np.floor((1.0 - v_hi) * height - 0.5)), 0)
    r1 = min(int(np.ceil((1.0 - v_lo) * height + 0.5)), height - 1)
    if c1 < c0 or r1 < r0 or abs(signed_area_2d(uv_tri)) <= 1e-14:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    rows, cols = np.meshgrid(np.arange(r0, r1 + 1), np.arange(c0, c1 + 1), indexing="ij")
    rows = rows.ravel()
    cols = cols.ravel()
    u, v = texel_center_uv(rows, cols, width, height)
    bary = barycentric_2d_many(np.stack([u, v], axis=1), uv_tri)
    inside = np.all(bary >= 0.0, axis=1)
    return rows[inside], cols[inside]


def validate_atlas(atlas: UVAtlas, mesh: TriangleMesh) -> AtlasReport:
    """Rasterize every placement, dilate by the gutter, and report collisions,
    occupancy, and out-of-bounds charts."""
    uvs = np.asarray(atlas.placements, dtype=np.float64)
    if uvs.shape[0] != mesh.faces.shape[0]:
        raise ConfigError(
            f"atlas has {uvs.shape[0]} placements for {mesh.faces.shape[0]} faces"
        )
    resolution = atlas.resolution
    gutter = atlas.gutter
    nf = uvs.shape[0]
    owner = np.full((resolution, resolution), -1, dtype=np.int64)
    out_of_bounds = []
    overlap_pairs = set()
    overlap_texels = 0
    covered_count = 0
    offsets = [
        (dr, dc)
        for dr in range(-gutter, gutter + 1)
        for dc in range(-gutter, gutter + 1)
    ]
    for fi in range(nf):
        tri = uvs[fi]
        if tri.min() < 0.0 or tri.max() > 1.0:
            out_of_bounds.append(fi)
        rows, cols = covered_texels(tri, resolution, resolution)
        covered_count += rows.size
        if rows.size == 0:
            continue
        dil_r = np.concatenate([rows + dr for dr, _ in offsets])
        dil_c = np.concatenate([cols + dc for _, dc in offsets])
        keep = (dil_r >= 0) & (dil_r < resolution) & (dil_c >= 0) & (dil_c < resolution)
        flat = np.unique(dil_r[keep] * resolution + dil_c[keep])
        prev = owner.ravel()[flat]
        clash = prev >= 0
        if np.any(clash):
            overlap_texels += int(np.count_nonzero(clash))
            for other in np.unique(prev[clash]):
                overlap_pairs.add((int(other), fi))
        owner.ravel()[flat] = fi
    return AtlasReport(
        occupancy=covered_count / float(resolution * resolution),
        overlap_texels=overlap_texels,
        overlap_faces=sorted(overlap_pairs),
        out_of_bounds=out_of_bounds,
    )
