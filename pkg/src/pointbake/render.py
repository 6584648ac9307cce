"""Offscreen software renderer.

Just enough rasterizer to judge bake quality: perspective projection,
z-buffer, perspective-correct UV/attribute interpolation, nearest-neighbor
texture sampling, and one directional light with an ambient floor. No
back-face culling, so winding mistakes show up as shading, not holes.

Determinism: faces rasterize in index order against a strict-greater depth
test, so the first face wins exact depth ties and two runs produce
byte-identical frames.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .assets import TexelGrid, TriangleMesh, new_texel_grid, uv_to_texel
from .errors import ConfigError, DegenerateTriangle
from .geometry import barycentric_2d_many

__all__ = ["Camera", "RenderedFrame", "render"]


@dataclasses.dataclass
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray = dataclasses.field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    fov_deg: float = 50.0
    width: int = 512
    height: int = 512
    near: float = 0.05
    far: float = 1e4

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=np.float64)
        self.look_at = np.asarray(self.look_at, dtype=np.float64)
        self.up = np.asarray(self.up, dtype=np.float64)
        if np.allclose(self.position, self.look_at):
            raise ConfigError("camera position and look_at coincide")
        if not 0.0 < self.fov_deg < 180.0:
            raise ConfigError(f"vertical fov must be in (0, 180), got {self.fov_deg}")
        if not self.near > 0.0:
            raise ConfigError(f"near plane must be positive, got {self.near}")
        if not self.far > self.near:
            raise ConfigError("far plane must lie beyond the near plane")
        if self.width < 1 or self.height < 1:
            raise ConfigError("image size must be at least 1x1")

    def basis(self):
        """(forward, right, true_up) orthonormal view frame."""
        f = self.look_at - self.position
        f = f / np.linalg.norm(f)
        up = self.up
        s = np.cross(f, up)
        if np.linalg.norm(s) < 1e-9:  # up parallel to the view direction
            up = np.array([0.0, 1.0, 0.0])
            s = np.cross(f, up)
            if np.linalg.norm(s) < 1e-9:
                up = np.array([1.0, 0.0, 0.0])
                s = np.cross(f, up)
        s = s / np.linalg.norm(s)
        u = np.cross(s, f)
        return f, s, u


@dataclasses.dataclass
class RenderedFrame:
    color: TexelGrid
    depth: np.ndarray  # (h, w) view-space distance, +inf where uncovered


def _decode_normal_map(samples: np.ndarray):
    """(raw vectors, usable mask). Raw norms below 0.5 mean 'no baked
    normal here' (the mid-gray background)."""
    raw = samples.astype(np.float64) / 255.0 * 2.0 - 1.0
    norms = np.linalg.norm(raw, axis=1)
    usable = norms >= 0.5
    raw[usable] /= norms[usable, None]
    return raw, usable


def render(
    mesh: TriangleMesh,
    texture: TexelGrid | None,
    normal_map: TexelGrid | None,
    camera: Camera,
    light_dir,
) -> RenderedFrame:
    """Rasterize the mesh. Texture None falls back to vertex colors (white if
    absent); normal_map None falls back to vertex normals, then face normals.
    Shading is albedo * (0.2 + 0.8 * max(0, dot(n, -light)))."""
    light = np.asarray(light_dir, dtype=np.float64)
    light = light / np.linalg.norm(light)
    w, h = camera.width, camera.height
    frame = new_texel_grid(w, h)
    inv_w_buf = np.zeros((h, w), dtype=np.float64)  # 1/depth, 0 = empty

    if texture is not None and mesh.uvs is None:
        raise ConfigError("mesh has no UVs to sample the texture with")

    f, s, u = camera.basis()
    d = mesh.vertices - camera.position
    depth = d @ f  # distance along the view axis, positive in front
    xv = d @ s
    yv = d @ u
    t = np.tan(np.deg2rad(camera.fov_deg) * 0.5)
    aspect = w / h
    with np.errstate(divide="ignore", invalid="ignore"):
        xn = xv / (depth * t * aspect)
        yn = yv / (depth * t)
    sx = (xn + 1.0) * 0.5 * w
    sy = (1.0 - yn) * 0.5 * h

    vert_colors = None
    if texture is None:
        if mesh.colors is not None:
            vert_colors = np.asarray(mesh.colors, dtype=np.float64)
        else:
            vert_colors = np.full((mesh.n_vertices, 3), 255.0)
    vert_normals = (
        np.asarray(mesh.normals, dtype=np.float64) if mesh.normals is not None else None
    )
    uvs = np.asarray(mesh.uvs, dtype=np.float64) if mesh.uvs is not None else None
    tris = mesh.face_triangles()

    for fi in range(mesh.faces.shape[0]):
        vid = mesh.faces[fi]
        zf = depth[vid]
        if np.any(zf < camera.near) or np.all(zf > camera.far):
            continue
        scr = np.stack([sx[vid], sy[vid]], axis=1)
        x0 = max(int(np.floor(scr[:, 0].min())), 0)
        x1 = min(int(np.ceil(scr[:, 0].max())), w - 1)
        y0 = max(int(np.floor(scr[:, 1].min())), 0)
        y1 = min(int(np.ceil(scr[:, 1].max())), h - 1)
        if x1 < x0 or y1 < y0:
            continue
        py, px = np.meshgrid(np.arange(y0, y1 + 1), np.arange(x0, x1 + 1), indexing="ij")
        py = py.ravel()
        px = px.ravel()
        centers = np.stack([px + 0.5, py + 0.5], axis=1)
        try:
            lam = barycentric_2d_many(centers, scr)
        except DegenerateTriangle:
            continue
        inside = np.all(lam >= 0.0, axis=1)
        if not np.any(inside):
            continue
        lam = lam[inside]
        py = py[inside]
        px = px[inside]

        inv_zf = 1.0 / zf
        inv_z = lam @ inv_zf
        z_pix = 1.0 / inv_z
        ok = (z_pix <= camera.far) & (inv_z > inv_w_buf[py, px])
        if not np.any(ok):
            continue
        lam = lam[ok]
        py = py[ok]
        px = px[ok]
        inv_z = inv_z[ok]
        # perspective-correct weights: lam_i / z_i, renormalized
        pw = lam * inv_zf[None, :]
        pw /= pw.sum(axis=1, keepdims=True)

        if texture is not None:
            uv = pw @ uvs[fi]
            rows, cols = uv_to_texel(uv[:, 0], uv[:, 1], texture.data.shape[1], texture.data.shape[0])
            albedo = texture.data[rows, cols].astype(np.float64)
        else:
            albedo = pw @ vert_colors[vid]

        fnorm = np.cross(tris[fi, 1] - tris[fi, 0], tris[fi, 2] - tris[fi, 0])
        flen = np.linalg.norm(fnorm)
        fnorm = fnorm / flen if flen > 0 else np.array([0.0, 0.0, 1.0])
        if normal_map is not None and uvs is not None:
            uv = pw @ uvs[fi]
            rows, cols = uv_to_texel(
                uv[:, 0], uv[:, 1], normal_map.data.shape[1], normal_map.data.shape[0]
            )
            normals, usable = _decode_normal_map(normal_map.data[rows, cols])
            normals[~usable] = fnorm
        elif vert_normals is not None:
            blend = pw @ vert_normals[vid]
            lens = np.linalg.norm(blend, axis=1)
            good = lens > 1e-6
            normals = np.where(good[:, None], blend / np.maximum(lens, 1e-300)[:, None], fnorm)
        else:
            normals = np.tile(fnorm, (lam.shape[0], 1))

        factor = 0.2 + 0.8 * np.maximum(0.0, normals @ (-light))
        shaded = np.clip(np.rint(albedo * factor[:, None]), 0, 255).astype(np.uint8)
        frame.data[py, px] = shaded
        frame.coverage[py, px] = True
        inv_w_buf[py, px] = inv_z

    depth_img = np.full((h, w), np.inf)
    hit = inv_w_buf > 0.0
    depth_img[hit] = 1.0 / inv_w_buf[hit]
    return RenderedFrame(color=frame, depth=depth_img)
