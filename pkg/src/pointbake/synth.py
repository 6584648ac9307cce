"""Synthetic scenes with exact analytic ground truth.

Three families: a checkered plane, a sphere with latitude stripes, and an
extruded staircase wall. Each scene provides a colored+oriented point cloud,
a coarse low mesh, a dense high mesh (for the remeshing baseline and the
dense-render reference), and closed-form color/normal functions of position
used for ground-truth textures.

Positions are quantized to float32 BEFORE colors and normals are sampled, so
the values survive the float32 PLY round trip exactly.

All randomness comes from numpy's PCG64 stream seeded with the given seed.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os

import numpy as np

from .assets import PointCloud, TriangleMesh, new_texel_grid, texel_center_uv, write_mesh, write_pointcloud
from .atlas import covered_texels
from .errors import ConfigError
from .geometry import barycentric_2d_many
from .transfer import BakeConfig, _clamp_bary, _dilate_gutter, _encode_normals

__all__ = [
    "SCENE_KINDS",
    "Scene",
    "synth_scene",
    "write_scene",
    "analytic_color",
    "analytic_normal",
    "bake_analytic",
]

SCENE_KINDS = ("checker-plane", "stripe-sphere", "step-wall")

# staircase cross-section in the xz plane, swept along y
_WALL_PROFILE = np.array(
    [[0.0, 0.0], [0.4, 0.0], [0.4, 0.3], [0.8, 0.3], [0.8, 0.6], [1.2, 0.6], [1.2, 0.9]]
)
_WALL_DEPTH = 1.0


@dataclasses.dataclass
class Scene:
    kind: str
    params: dict
    cloud: PointCloud
    low: TriangleMesh
    high: TriangleMesh
    d_max: float
    seed: int
    noise_sigma: float


def _default_params(kind: str) -> dict:
    if kind == "checker-plane":
        return {
            "size": 2.0,
            "period": 0.25,
            "color_a": [255, 255, 255],
            "color_b": [0, 0, 0],
        }
    if kind == "stripe-sphere":
        return {
            "stripe_width": math.pi / 16.0,
            "color_a": [230, 60, 40],
            "color_b": [40, 90, 230],
        }
    if kind == "step-wall":
        return {
            "band_period": 0.2,
            "color_a": [220, 180, 60],
            "color_b": [50, 70, 200],
        }
    raise ConfigError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")


def analytic_color(kind: str, params: dict, positions: np.ndarray) -> np.ndarray:
    """Ground-truth RGB (uint8) at each 3D position. Each scene's pattern is
    constant along its surface-normal direction, so slightly off-surface
    positions (texel unmapping, noisy points) evaluate consistently."""
    p = np.asarray(positions, dtype=np.float64)
    a = np.asarray(params["color_a"], dtype=np.uint8)
    b = np.asarray(params["color_b"], dtype=np.uint8)
    if kind == "checker-plane":
        period = params["period"]
        parity = (np.floor(p[:, 0] / period) + np.floor(p[:, 1] / period)) % 2
    elif kind == "stripe-sphere":
        r = np.linalg.norm(p, axis=1)
        theta = np.arccos(np.clip(p[:, 2] / np.maximum(r, 1e-300), -1.0, 1.0))
        parity = np.floor(theta / params["stripe_width"]) % 2
    elif kind == "step-wall":
        parity = np.floor(p[:, 1] / params["band_period"]) % 2
    else:
        raise ConfigError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")
    return np.where(parity[:, None] == 0, a, b).astype(np.uint8)


def _wall_segment_of(p: np.ndarray) -> np.ndarray:
    """Index of the nearest staircase segment for each point (xz distance)."""
    xz = p[:, [0, 2]]
    best_d = np.full(p.shape[0], np.inf)
    best = np.zeros(p.shape[0], dtype=np.int64)
    for si in range(len(_WALL_PROFILE) - 1):
        a = _WALL_PROFILE[si]
        b = _WALL_PROFILE[si + 1]
        ab = b - a
        t = np.clip(((xz - a) @ ab) / (ab @ ab), 0.0, 1.0)
        d = np.linalg.norm(xz - (a + t[:, None] * ab), axis=1)
        closer = d < best_d
        best_d[closer] = d[closer]
        best[closer] = si
    return best


def analytic_normal(kind: str, params: dict, positions: np.ndarray) -> np.ndarray:
    """Ground-truth unit surface normal at each 3D position."""
    p = np.asarray(positions, dtype=np.float64)
    if kind == "checker-plane":
        return np.tile([0.0, 0.0, 1.0], (p.shape[0], 1))
    if kind == "stripe-sphere":
        r = np.linalg.norm(p, axis=1, keepdims=True)
        return p / np.maximum(r, 1e-300)
    if kind == "step-wall":
        seg = _wall_segment_of(p)
        # even segments are treads (face +z), odd ones risers (face +x)
        out = np.zeros((p.shape[0], 3))
        out[seg % 2 == 0, 2] = 1.0
        out[seg % 2 == 1, 0] = 1.0
        return out
    raise ConfigError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")


# ---------------------------------------------------------------------------
# meshes


def _grid_plane(n: int, size: float) -> TriangleMesh:
    xs = np.linspace(0.0, size, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel(), np.zeros((n + 1) ** 2)], axis=1)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a = (ii * (n + 1) + jj).ravel()
    b = ((ii + 1) * (n + 1) + jj).ravel()
    faces = np.concatenate(
        [np.stack([a, b, b + 1], axis=1), np.stack([a, b + 1, a + 1], axis=1)]
    ).astype(np.int64)
    return TriangleMesh(vertices=verts, faces=faces)


_ICO_T = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
        [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
        [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
    ],
    dtype=np.float64,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def icosphere(level: int) -> TriangleMesh:
    """Unit sphere: icosahedron subdivided `level` times (20 * 4^level faces)."""
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1, keepdims=True)
    faces = _ICO_FACES.copy()
    for _ in range(level):
        edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [0, 2]]])
        edges = np.sort(edges, axis=1)
        uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
        mids = verts[uniq[:, 0]] + verts[uniq[:, 1]]
        mids /= np.linalg.norm(mids, axis=1, keepdims=True)
        mid_idx = verts.shape[0] + inverse.reshape(3, -1)
        ab, bc, ac = mid_idx[0], mid_idx[1], mid_idx[2]
        verts = np.vstack([verts, mids])
        faces = np.concatenate(
            [
                np.stack([faces[:, 0], ab, ac], axis=1),
                np.stack([faces[:, 1], bc, ab], axis=1),
                np.stack([faces[:, 2], ac, bc], axis=1),
                np.stack([ab, bc, ac], axis=1),
            ]
        )
    return TriangleMesh(vertices=verts, faces=faces)


def _wall_mesh(sub: int) -> TriangleMesh:
    """Staircase wall; sub=1 gives the 12-face low mesh, larger values
    subdivide each segment into sub x sub quads."""
    verts = []
    faces = []
    for si in range(len(_WALL_PROFILE) - 1):
        a2 = _WALL_PROFILE[si]
        b2 = _WALL_PROFILE[si + 1]
        want_n = np.array([0.0, 0.0, 1.0]) if si % 2 == 0 else np.array([1.0, 0.0, 0.0])
        base = len(verts)
        for i in range(sub + 1):
            t = i / sub
            x, z = a2 + t * (b2 - a2)
            for j in range(sub + 1):
                verts.append([x, j / sub * _WALL_DEPTH, z])
        # all quads of a segment share one orientation; probe with the first
        v = np.asarray(verts[base:])
        n = np.cross(v[sub + 1] - v[0], v[sub + 2] - v[0])
        flip = n @ want_n < 0
        for i in range(sub):
            for j in range(sub):
                p00 = base + i * (sub + 1) + j
                p10 = base + (i + 1) * (sub + 1) + j
                if flip:
                    faces.extend([[p00, p10 + 1, p10], [p00, p00 + 1, p10 + 1]])
                else:
                    faces.extend([[p00, p10, p10 + 1], [p00, p10 + 1, p00 + 1]])
    return TriangleMesh(
        vertices=np.asarray(verts, dtype=np.float64),
        faces=np.asarray(faces, dtype=np.int64),
    )


def _low_mesh(kind: str, params: dict) -> TriangleMesh:
    if kind == "checker-plane":
        return _grid_plane(1, params["size"])
    if kind == "stripe-sphere":
        return icosphere(2)
    return _wall_mesh(1)


_HIGH_DETAIL_DEFAULT = {"checker-plane": 64, "stripe-sphere": 7, "step-wall": 16}


def _high_mesh(kind: str, params: dict, detail: int) -> TriangleMesh:
    if kind == "checker-plane":
        mesh = _grid_plane(detail, params["size"])
    elif kind == "stripe-sphere":
        mesh = icosphere(detail)
    else:
        mesh = _wall_mesh(detail)
    mesh.colors = analytic_color(kind, params, mesh.vertices).astype(np.float64)
    mesh.normals = analytic_normal(kind, params, mesh.vertices)
    return mesh


# ---------------------------------------------------------------------------
# point sampling


def _sample_surface(kind: str, params: dict, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "checker-plane":
        pos = np.zeros((n, 3))
        pos[:, :2] = rng.uniform(0.0, params["size"], size=(n, 2))
        return pos
    if kind == "stripe-sphere":
        v = rng.standard_normal((n, 3))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        norms[norms < 1e-12] = 1.0
        return v / norms
    # step-wall: segments weighted by area (length x depth)
    seg_vec = _WALL_PROFILE[1:] - _WALL_PROFILE[:-1]
    seg_len = np.linalg.norm(seg_vec, axis=1)
    seg = rng.choice(seg_len.size, size=n, p=seg_len / seg_len.sum())
    t = rng.uniform(0.0, 1.0, size=n)
    xz = _WALL_PROFILE[seg] + t[:, None] * seg_vec[seg]
    y = rng.uniform(0.0, _WALL_DEPTH, size=n)
    return np.stack([xz[:, 0], y, xz[:, 1]], axis=1)


def _surface_area(kind: str, params: dict) -> float:
    if kind == "checker-plane":
        return params["size"] ** 2
    if kind == "stripe-sphere":
        return 4.0 * math.pi
    seg_len = np.linalg.norm(_WALL_PROFILE[1:] - _WALL_PROFILE[:-1], axis=1)
    return float(seg_len.sum() * _WALL_DEPTH)


def _sagitta_bound(kind: str, low: TriangleMesh) -> float:
    """Worst-case gap between the low mesh and the true surface."""
    if kind != "stripe-sphere":
        return 0.0  # plane and wall faces lie exactly on the surface
    tris = low.face_triangles()
    n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    plane_dist = np.abs(np.einsum("ij,ij->i", n, tris[:, 0]))
    return float(1.0 - plane_dist.min())


def synth_scene(
    kind: str,
    n_points: int = 100_000,
    noise_sigma: float = 0.0,
    seed: int = 0,
    high_detail: int | None = None,
) -> Scene:
    """Build one scene in memory. Points are sampled on the analytic surface,
    displaced by norm-clipped (3 sigma) Gaussian noise, quantized to float32,
    and only then colored, so stored colors are exactly the analytic colors
    at the stored positions."""
    params = _default_params(kind)
    if n_points < 1000:
        raise ConfigError(f"need at least 1000 points, got {n_points}")
    if noise_sigma < 0.0:
        raise ConfigError(f"noise_sigma must be non-negative, got {noise_sigma}")
    rng = np.random.Generator(np.random.PCG64(seed))

    pos = _sample_surface(kind, params, n_points, rng)
    if noise_sigma > 0.0:
        noise = rng.normal(0.0, noise_sigma, size=(n_points, 3))
        lens = np.linalg.norm(noise, axis=1)
        cap = 3.0 * noise_sigma
        over = lens > cap
        noise[over] *= (cap / lens[over])[:, None]
        pos = pos + noise
    pos = pos.astype(np.float32).astype(np.float64)

    colors = analytic_color(kind, params, pos)
    normals = analytic_normal(kind, params, pos)
    cloud = PointCloud(positions=pos, normals=normals, colors=colors)

    low = _low_mesh(kind, params)
    detail = _HIGH_DETAIL_DEFAULT[kind] if high_detail is None else high_detail
    high = _high_mesh(kind, params, detail)

    spacing = math.sqrt(_surface_area(kind, params) / n_points)
    d_max = 4.0 * spacing + _sagitta_bound(kind, low) + 3.0 * noise_sigma
    return Scene(
        kind=kind,
        params=params,
        cloud=cloud,
        low=low,
        high=high,
        d_max=d_max,
        seed=seed,
        noise_sigma=noise_sigma,
    )


_SCENE_CAMERA = {
    "checker-plane": {
        "position": [1.0, -1.5, 2.0],
        "look_at": [1.0, 1.0, 0.0],
        "up": [0.0, 0.0, 1.0],
        "fov_deg": 50.0,
        "width": 512,
        "height": 512,
        "near": 0.05,
        "far": 100.0,
    },
    "stripe-sphere": {
        "position": [2.2, 1.6, 1.2],
        "look_at": [0.0, 0.0, 0.0],
        "up": [0.0, 0.0, 1.0],
        "fov_deg": 45.0,
        "width": 512,
        "height": 512,
        "near": 0.05,
        "far": 100.0,
    },
    "step-wall": {
        "position": [2.5, 0.5, 1.9],
        "look_at": [0.6, 0.5, 0.45],
        "up": [0.0, 0.0, 1.0],
        "fov_deg": 50.0,
        "width": 512,
        "height": 512,
        "near": 0.05,
        "far": 100.0,
    },
}

_SCENE_LIGHT = {
    "checker-plane": [-0.35, -0.25, -0.9],
    "stripe-sphere": [-0.6, -0.4, -0.7],
    "step-wall": [-0.7, -0.15, -0.7],
}


def write_scene(
    scene: Scene,
    out_dir: str,
    resolution: int = 512,
    gutter: int = 2,
    reference: str = "analytic",
) -> str:
    """Write cloud/meshes plus a manifest the bench harness consumes.
    Returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    cloud_path = os.path.join(out_dir, "cloud.ply")
    low_path = os.path.join(out_dir, "low.obj")
    high_path = os.path.join(out_dir, "high.obj")
    write_pointcloud(cloud_path, scene.cloud)
    write_mesh(low_path, scene.low)
    write_mesh(high_path, scene.high)

    light = _SCENE_LIGHT[scene.kind]
    manifest = {
        "kind": scene.kind,
        "params": scene.params,
        "seed": scene.seed,
        "noise_sigma": scene.noise_sigma,
        "n_points": len(scene.cloud),
        "cloud": "cloud.ply",
        "low_mesh": "low.obj",
        "high_mesh": "high.obj",
        "cameras": [_SCENE_CAMERA[scene.kind]],
        "light": light,
        "reference": reference,
        "cfg": {
            "d_max": scene.d_max,
            "angle_max_deg": 120.0,
            "resolution": resolution,
            "gutter": gutter,
            "bake_normals": True,
            "vertex_attr_k": 8,
        },
        "scale_note": (
            "desk-scale stand-in: 1e5-1e6 points and 1e2-1e4 faces instead of "
            "scan-scale tens of millions"
        ),
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest_path


def bake_analytic(low: TriangleMesh, cfg: BakeConfig, kind: str, params: dict):
    """Ground-truth maps: evaluate the analytic color/normal at every covered
    texel's unmapped 3D position on the low mesh. Same dilation as real bakes."""
    res = cfg.resolution
    texture = new_texel_grid(res)
    normal_map = new_texel_grid(res)
    normal_map.data.fill(128)
    tris = low.face_triangles()
    uvs = np.asarray(low.uvs, dtype=np.float64)
    for fi in range(tris.shape[0]):
        rows, cols = covered_texels(uvs[fi], res, res)
        if rows.size == 0:
            continue
        u, v = texel_center_uv(rows, cols, res, res)
        bary = _clamp_bary(barycentric_2d_many(np.stack([u, v], axis=1), uvs[fi]))
        pos = bary @ tris[fi]
        texture.data[rows, cols] = analytic_color(kind, params, pos)
        texture.coverage[rows, cols] = True
        normal_map.data[rows, cols] = _encode_normals(analytic_normal(kind, params, pos))
        normal_map.coverage[rows, cols] = True
    _dilate_gutter([texture, normal_map], cfg.gutter)
    return texture, normal_map
