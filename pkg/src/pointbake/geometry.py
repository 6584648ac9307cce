"""Triangle and barycentric primitives.

Conventions used across the package:

- vectors are float64 numpy arrays; a 3D triangle is a (3, 3) array with one
  vertex per row, a UV triangle is (3, 2)
- barycentric coordinates are (3,) arrays (w0, w1, w2) that sum to 1 and are
  affine weights of the triangle's vertices in order
- a 3D triangle is degenerate when its area is <= 1e-12; degenerate inputs
  raise DegenerateTriangle instead of returning garbage

Scalar entry points (triangle_normal, barycentric_of, ...) are the documented
contract surface; the *_many variants are the vectorized kernels used by the
bulk pipeline and compute the same quantities.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateTriangle

__all__ = [
    "DEGENERATE_AREA",
    "triangle_area",
    "triangle_normal",
    "barycentric_of",
    "apply_barycentric",
    "point_triangle_distance",
    "normal_angle_deg",
    "normalize",
    "closest_on_triangles",
    "barycentric_of_many",
    "normal_angles_deg",
    "signed_area_2d",
    "barycentric_2d_many",
]

DEGENERATE_AREA = 1e-12


def _as_f64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def normalize(v) -> np.ndarray:
    """Unit vector in the direction of v. Raises ValueError on zero length."""
    v = _as_f64(v)
    n = float(np.linalg.norm(v))
    if n < 1e-300:
        raise ValueError("cannot normalize a zero-length vector")
    return v / n


def triangle_area(t) -> float:
    t = _as_f64(t)
    return 0.5 * float(np.linalg.norm(np.cross(t[1] - t[0], t[2] - t[0])))


def triangle_normal(t) -> np.ndarray:
    """Unit normal of the (v1-v0) x (v2-v0) winding."""
    t = _as_f64(t)
    cr = np.cross(t[1] - t[0], t[2] - t[0])
    area = 0.5 * float(np.linalg.norm(cr))
    if area <= DEGENERATE_AREA:
        raise DegenerateTriangle(f"triangle area {area:g} is at or below {DEGENERATE_AREA:g}")
    return cr / (2.0 * area)


def barycentric_of(p, t) -> np.ndarray:
    """Barycentric coordinates of p's orthogonal projection onto t's plane.

    Uses the Gram-matrix solve on edge dot products; the out-of-plane
    component of p drops out, so no explicit projection is needed.
    """
    b = barycentric_of_many(_as_f64(p)[None, :], _as_f64(t))
    return b[0]


def apply_barycentric(b, t) -> np.ndarray:
    """Affine combination b0*v0 + b1*v1 + b2*v2; works for 3D and UV triangles."""
    b = _as_f64(b)
    t = _as_f64(t)
    return b @ t


def point_triangle_distance(p, t) -> float:
    """Exact Euclidean distance from p to the closed triangle t."""
    t = _as_f64(t)
    if triangle_area(t) <= DEGENERATE_AREA:
        raise DegenerateTriangle("point_triangle_distance needs a non-degenerate triangle")
    _, dist, _ = closest_on_triangles(_as_f64(p)[None, :], t[None, :, :])
    return float(dist[0])


def normal_angle_deg(a, b) -> float:
    """Angle between two unit vectors in degrees, dot clamped to [-1, 1]."""
    d = float(np.dot(_as_f64(a), _as_f64(b)))
    return float(np.degrees(np.arccos(min(1.0, max(-1.0, d)))))


def normal_angles_deg(vecs, ref) -> np.ndarray:
    """Vectorized normal_angle_deg of each row of vecs against one unit vector."""
    d = np.clip(_as_f64(vecs) @ _as_f64(ref), -1.0, 1.0)
    return np.degrees(np.arccos(d))


def barycentric_of_many(points, t) -> np.ndarray:
    """Barycentric coordinates of each point's projection onto triangle t.

    points is (n, 3), t is (3, 3); returns (n, 3). Raises DegenerateTriangle
    when the Gram determinant (= squared doubled area) vanishes.
    """
    points = _as_f64(points)
    t = _as_f64(t)
    ab = t[1] - t[0]
    ac = t[2] - t[0]
    d00 = float(ab @ ab)
    d01 = float(ab @ ac)
    d11 = float(ac @ ac)
    denom = d00 * d11 - d01 * d01
    # denom equals |ab x ac|^2 = (2*area)^2
    if denom <= (2.0 * DEGENERATE_AREA) ** 2:
        raise DegenerateTriangle("barycentric coordinates need a non-degenerate triangle")
    ap = points - t[0]
    d20 = ap @ ab
    d21 = ap @ ac
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    return np.stack([1.0 - v - w, v, w], axis=1)


def closest_on_triangles(points, tris):
    """Closest point on each triangle to each point (Ericson's region test).

    points is (n, 3); tris is (n, 3, 3) or a single (3, 3) broadcast to all
    points. Returns (closest (n, 3), distance (n,), barycentric (n, 3)).
    Triangles are assumed non-degenerate; callers validate their meshes.
    """
    points = _as_f64(points)
    tris = _as_f64(tris)
    if tris.ndim == 2:
        tris = np.broadcast_to(tris, (points.shape[0], 3, 3))
    a = tris[:, 0, :]
    b = tris[:, 1, :]
    c = tris[:, 2, :]
    ab = b - a
    ac = c - a
    ap = points - a
    d1 = np.einsum("ij,ij->i", ap, ab)
    d2 = np.einsum("ij,ij->i", ap, ac)
    bp = points - b
    d3 = np.einsum("ij,ij->i", bp, ab)
    d4 = np.einsum("ij,ij->i", bp, ac)
    cp = points - c
    d5 = np.einsum("ij,ij->i", cp, ab)
    d6 = np.einsum("ij,ij->i", cp, ac)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    n = points.shape[0]
    bary = np.empty((n, 3), dtype=np.float64)

    # interior default, overwritten by edge/vertex regions below
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = np.where(denom != 0.0, vb / denom, 0.0)
        w_in = np.where(denom != 0.0, vc / denom, 0.0)
    bary[:, 0] = 1.0 - v_in - w_in
    bary[:, 1] = v_in
    bary[:, 2] = w_in

    # edge BC; the denominators below are squared edge lengths, nonzero for
    # non-degenerate triangles
    m = (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)
    w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    bary[m, 0] = 0.0
    bary[m, 1] = 1.0 - w[m]
    bary[m, 2] = w[m]

    # edge AC
    m = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    w = d2 / (d2 - d6)
    bary[m, 0] = 1.0 - w[m]
    bary[m, 1] = 0.0
    bary[m, 2] = w[m]

    # edge AB
    m = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    v = d1 / (d1 - d3)
    bary[m, 0] = 1.0 - v[m]
    bary[m, 1] = v[m]
    bary[m, 2] = 0.0

    # vertices last so they win every tie
    m = (d6 >= 0.0) & (d5 <= d6)
    bary[m] = (0.0, 0.0, 1.0)
    m = (d3 >= 0.0) & (d4 <= d3)
    bary[m] = (0.0, 1.0, 0.0)
    m = (d1 <= 0.0) & (d2 <= 0.0)
    bary[m] = (1.0, 0.0, 0.0)

    closest = np.einsum("ij,ijk->ik", bary, tris)
    dist = np.linalg.norm(points - closest, axis=1)
    return closest, dist, bary


def signed_area_2d(t) -> float:
    """Signed area of a UV triangle; positive for counter-clockwise winding."""
    t = _as_f64(t)
    return 0.5 * float(
        (t[1, 0] - t[0, 0]) * (t[2, 1] - t[0, 1]) - (t[1, 1] - t[0, 1]) * (t[2, 0] - t[0, 0])
    )


def barycentric_2d_many(points, t) -> np.ndarray:
    """Barycentric coordinates of 2D points w.r.t. a UV triangle; (n, 2) -> (n, 3)."""
    points = _as_f64(points)
    t = _as_f64(t)
    det = (t[1, 0] - t[0, 0]) * (t[2, 1] - t[0, 1]) - (t[1, 1] - t[0, 1]) * (t[2, 0] - t[0, 0])
    if abs(det) <= 2e-14:
        raise DegenerateTriangle("UV triangle is degenerate")
    dx = points[:, 0] - t[0, 0]
    dy = points[:, 1] - t[0, 1]
    v = (dx * (t[2, 1] - t[0, 1]) - dy * (t[2, 0] - t[0, 0])) / det
    w = (dy * (t[1, 0] - t[0, 0]) - dx * (t[1, 1] - t[0, 1])) / det
    return np.stack([1.0 - v - w, v, w], axis=1)
