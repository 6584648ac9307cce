"""Uniform spatial hashing for points and triangle soups.

The point grid stores, per cell, the indices of the points inside it (CSR
layout: one sorted index array plus per-cell offsets). A point's cell
coordinate is floor((position - origin) / cell_size); grid dimensions are
clamped to at least 1 per axis so degenerate extents still index.

`candidates_near_triangle` returns a SUPERSET of every point within d_max of
the triangle (no false negatives); callers apply the exact distance/angle
filter themselves. `k_nearest` is an exact k-NN via expanding chessboard
rings: once the k-th best distance is <= r * cell_size, no cell beyond ring
r can improve it.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConfigError
from .geometry import closest_on_triangles

__all__ = [
    "UniformGrid",
    "build_grid",
    "candidates_near_triangle",
    "k_nearest",
    "FaceGrid",
    "build_face_grid",
    "closest_on_soup",
]


@dataclasses.dataclass
class UniformGrid:
    origin: np.ndarray  # (3,)
    cell_size: float
    dims: np.ndarray  # (3,) int64, each >= 1
    cell_start: np.ndarray  # (prod(dims) + 1,) CSR offsets
    point_ids: np.ndarray  # (n,) point indices grouped by cell
    positions: np.ndarray  # (n, 3) the indexed points

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    def cell_of(self, positions) -> np.ndarray:
        """floor cell coordinates; unclipped, so off-grid queries are allowed."""
        return np.floor((np.asarray(positions) - self.origin) / self.cell_size).astype(np.int64)


def _csr_from_cells(flat: np.ndarray, n_cells: int):
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n_cells)
    starts = np.zeros(n_cells + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return starts, order


def build_grid(positions: np.ndarray, cell_size: float) -> UniformGrid:
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3 or positions.shape[0] == 0:
        raise ConfigError("grid needs a non-empty (n, 3) position array")
    if not cell_size > 0.0:
        raise ConfigError(f"cell_size must be positive, got {cell_size}")
    origin = positions.min(axis=0)
    extent = positions.max(axis=0) - origin
    dims = np.maximum(np.floor(extent / cell_size).astype(np.int64) + 1, 1)
    cells = np.floor((positions - origin) / cell_size).astype(np.int64)
    # points sitting exactly on the max boundary floor into the last cell row
    cells = np.minimum(cells, dims - 1)
    flat = (cells[:, 0] * dims[1] + cells[:, 1]) * dims[2] + cells[:, 2]
    starts, order = _csr_from_cells(flat, int(np.prod(dims)))
    return UniformGrid(
        origin=origin,
        cell_size=float(cell_size),
        dims=dims,
        cell_start=starts,
        point_ids=order,
        positions=positions,
    )


def _gather_box(starts: np.ndarray, ids: np.ndarray, dims: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Concatenate CSR id lists of every cell in the inclusive box [lo, hi]."""
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, dims - 1)
    if np.any(hi < lo):
        return np.empty(0, dtype=np.int64)
    xs = np.arange(lo[0], hi[0] + 1)
    ys = np.arange(lo[1], hi[1] + 1)
    zs = np.arange(lo[2], hi[2] + 1)
    flat = ((xs[:, None] * dims[1] + ys[None, :])[:, :, None] * dims[2] + zs[None, None, :]).ravel()
    s = starts[flat]
    e = starts[flat + 1]
    lens = e - s
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    rel = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(lens) - lens, lens)
    return ids[np.repeat(s, lens) + rel]


def candidates_near_triangle(grid: UniformGrid, triangle: np.ndarray, d_max: float) -> np.ndarray:
    """Indices of all points in cells touching the triangle's AABB expanded
    by d_max. Superset guarantee: every point within d_max of the triangle is
    returned (a point farther than d_max from the AABB is farther than d_max
    from the triangle)."""
    t = np.asarray(triangle, dtype=np.float64)
    lo = grid.cell_of(t.min(axis=0) - d_max)
    hi = grid.cell_of(t.max(axis=0) + d_max)
    return _gather_box(grid.cell_start, grid.point_ids, grid.dims, lo, hi)


def k_nearest(grid: UniformGrid, query: np.ndarray, k: int) -> np.ndarray:
    """Exact k nearest indexed points to one query position.

    Ties on distance break toward the lower point index. Returns fewer than k
    indices only when the grid holds fewer than k points.
    """
    query = np.asarray(query, dtype=np.float64)
    k = min(k, grid.positions.shape[0])
    center = grid.cell_of(query)
    best_ids = np.empty(0, dtype=np.int64)
    best_d = np.empty(0, dtype=np.float64)
    r = 0
    max_r = int(
        max(
            np.max(center - 0),
            np.max(grid.dims - 1 - center),
            0,
        )
    )
    while True:
        if r == 0:
            ring_ids = _gather_box(grid.cell_start, grid.point_ids, grid.dims, center, center)
        else:
            outer = _gather_box(grid.cell_start, grid.point_ids, grid.dims, center - r, center + r)
            inner = _gather_box(
                grid.cell_start, grid.point_ids, grid.dims, center - (r - 1), center + (r - 1)
            )
            ring_ids = np.setdiff1d(outer, inner, assume_unique=True)
        if ring_ids.size:
            d = np.linalg.norm(grid.positions[ring_ids] - query, axis=1)
            all_ids = np.concatenate([best_ids, ring_ids])
            all_d = np.concatenate([best_d, d])
            order = np.lexsort((all_ids, all_d))[:k]
            best_ids = all_ids[order]
            best_d = all_d[order]
        # cells beyond ring r hold only points at distance >= r * cell_size;
        # strict comparison keeps equal-distance ties exact across that boundary
        if best_ids.size == k and k > 0 and best_d[-1] < r * grid.cell_size:
            break
        if r >= max_r:
            break
        r += 1
    return best_ids


# ---------------------------------------------------------------------------
# Triangle soups


@dataclasses.dataclass
class FaceGrid:
    origin: np.ndarray
    cell_size: float
    dims: np.ndarray
    cell_start: np.ndarray
    face_ids: np.ndarray  # faces registered in every cell their AABB overlaps
    triangles: np.ndarray  # (m, 3, 3)

    def cell_of(self, positions) -> np.ndarray:
        return np.floor((np.asarray(positions) - self.origin) / self.cell_size).astype(np.int64)


def build_face_grid(triangles: np.ndarray, cell_size: float | None = None) -> FaceGrid:
    """Register each triangle in all cells its AABB overlaps.

    Default cell size is 4x the median AABB extent, a balance between cell
    occupancy and ring fan-out.
    """
    tris = np.asarray(triangles, dtype=np.float64)
    if tris.ndim != 3 or tris.shape[0] == 0:
        raise ConfigError("face grid needs a non-empty (m, 3, 3) triangle array")
    lo_f = tris.min(axis=1)
    hi_f = tris.max(axis=1)
    if cell_size is None:
        spans = hi_f - lo_f
        cell_size = float(np.median(spans)) * 4.0
        if cell_size <= 0.0:
            cell_size = float(spans.max()) * 4.0 or 1.0
    origin = lo_f.min(axis=0)
    extent = hi_f.max(axis=0) - origin
    dims = np.maximum(np.floor(extent / cell_size).astype(np.int64) + 1, 1)

    lo_c = np.clip(np.floor((lo_f - origin) / cell_size).astype(np.int64), 0, dims - 1)
    hi_c = np.clip(np.floor((hi_f - origin) / cell_size).astype(np.int64), 0, dims - 1)
    span = hi_c - lo_c + 1
    counts = span[:, 0] * span[:, 1] * span[:, 2]
    total = int(counts.sum())
    face_rep = np.repeat(np.arange(tris.shape[0], dtype=np.int64), counts)
    rank = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    sy = np.repeat(span[:, 1], counts)
    sz = np.repeat(span[:, 2], counts)
    iz = rank % sz
    iy = (rank // sz) % sy
    ix = rank // (sz * sy)
    cx = np.repeat(lo_c[:, 0], counts) + ix
    cy = np.repeat(lo_c[:, 1], counts) + iy
    cz = np.repeat(lo_c[:, 2], counts) + iz
    flat = (cx * dims[1] + cy) * dims[2] + cz
    order = np.argsort(flat, kind="stable")
    starts = np.zeros(int(np.prod(dims)) + 1, dtype=np.int64)
    np.cumsum(np.bincount(flat, minlength=int(np.prod(dims))), out=starts[1:])
    return FaceGrid(
        origin=origin,
        cell_size=float(cell_size),
        dims=dims,
        cell_start=starts,
        face_ids=face_rep[order],
        triangles=tris,
    )


_PAIR_CAP = 1 << 17  # bound on point-triangle pairs evaluated per batch


def closest_on_soup(fgrid: FaceGrid, queries: np.ndarray, seed_tree=None):
    """Exact closest point on any triangle of the soup, for each query.

    A seed face (nearest centroid) yields a per-query distance upper bound;
    each batch of queries then collects every face whose AABB can beat the
    batch's worst bound and evaluates exact distances. Returns
    (distance (n,), face (n,), barycentric (n, 3), point (n, 3)).
    """
    from scipy.spatial import cKDTree

    queries = np.asarray(queries, dtype=np.float64)
    tris = fgrid.triangles
    if seed_tree is None:
        seed_tree = cKDTree(tris.mean(axis=1))
    _, seed = seed_tree.query(queries)
    _, d_ub, _ = closest_on_triangles(queries, tris[seed])

    n = queries.shape[0]
    out_d = np.empty(n, dtype=np.float64)
    out_f = np.empty(n, dtype=np.int64)
    out_b = np.empty((n, 3), dtype=np.float64)
    batch = 256
    for i0 in range(0, n, batch):
        q = queries[i0 : i0 + batch]
        ub = d_ub[i0 : i0 + batch]
        bound = float(ub.max())
        lo = fgrid.cell_of(q.min(axis=0) - bound)
        hi = fgrid.cell_of(q.max(axis=0) + bound)
        cand = np.unique(_gather_box(fgrid.cell_start, fgrid.face_ids, fgrid.dims, lo, hi))
        if cand.size == 0:
            cand = np.unique(seed[i0 : i0 + batch])
        nq = q.shape[0]
        best_d = np.full(nq, np.inf)
        best_f = np.zeros(nq, dtype=np.int64)
        best_b = np.zeros((nq, 3))
        step = max(1, _PAIR_CAP // nq)
        for c0 in range(0, cand.size, step):
            cc = cand[c0 : c0 + step]
            qq = np.repeat(q, cc.size, axis=0)
            tt = np.tile(tris[cc], (nq, 1, 1))
            _, d, b = closest_on_triangles(qq, tt)
            d = d.reshape(nq, cc.size)
            b = b.reshape(nq, cc.size, 3)
            j = np.argmin(d, axis=1)
            rows = np.arange(nq)
            better = d[rows, j] < best_d
            best_d[better] = d[rows, j][better]
            best_f[better] = cc[j[better]]
            best_b[better] = b[rows, j][better]
        out_d[i0 : i0 + batch] = best_d
        out_f[i0 : i0 + batch] = best_f
        out_b[i0 : i0 + batch] = best_b
    out_p = np.einsum("ij,ijk->ik", out_b, tris[out_f])
    return out_d, out_f, out_b, out_p
