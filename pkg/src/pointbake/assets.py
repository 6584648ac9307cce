"""Data containers and file I/O: PLY point clouds, OBJ meshes, PNG images.

Containers are struct-of-arrays dataclasses around float64 numpy arrays
(colors are 8-bit only inside images; vertex and point colors live in a
0..255 float domain so interpolation never quantizes midway).

Image convention, used everywhere in the package: row 0 of an array or PNG
is the TOP row, and texture coordinate (0, 0) addresses the BOTTOM-left
texel. `uv_to_texel` / `texel_center_uv` are the two sides of that mapping.

Parsers are hand-rolled because the error contract is part of the format:
- SchemaError names the missing/mistyped vertex property or schema violation
- TruncatedFile fires when a body ends before the header's record count
- NonTriangleFace carries the 1-based line number of the offending OBJ face
- UnsupportedFormat covers layouts we do not read (16-bit PNG, alpha,
  big-endian PLY, list properties in the vertex element)
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    NonTriangleFace,
    SchemaError,
    TruncatedFile,
    UnsupportedFormat,
)

__all__ = [
    "PointCloud",
    "TriangleMesh",
    "TexelGrid",
    "new_texel_grid",
    "uv_to_texel",
    "texel_center_uv",
    "read_pointcloud",
    "write_pointcloud",
    "read_mesh",
    "write_mesh",
    "read_image",
    "write_image",
]


@dataclasses.dataclass
class PointCloud:
    """Colored, oriented point set. normals are unit length within 1e-3."""

    positions: np.ndarray  # (n, 3) float64
    normals: np.ndarray  # (n, 3) float64
    colors: np.ndarray  # (n, 3) uint8
    dropped_points: int = 0  # zero-length normals removed at load time

    def __len__(self) -> int:
        return self.positions.shape[0]

    def validate(self) -> None:
        n = len(self)
        if n == 0:
            raise SchemaError("point cloud is empty")
        if self.normals.shape != (n, 3) or self.colors.shape != (n, 3):
            raise SchemaError("point cloud arrays disagree on length")
        norms = np.linalg.norm(self.normals, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-3):
            raise SchemaError("point cloud normals are not unit length")


@dataclasses.dataclass
class TriangleMesh:
    """Indexed triangle mesh with optional per-vertex colors/normals and
    per-face-corner UVs."""

    vertices: np.ndarray  # (nv, 3) float64
    faces: np.ndarray  # (nf, 3) int64
    normals: np.ndarray | None = None  # (nv, 3) float64
    colors: np.ndarray | None = None  # (nv, 3) float64 in 0..255
    uvs: np.ndarray | None = None  # (nf, 3, 2) float64

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def face_triangles(self) -> np.ndarray:
        """(nf, 3, 3) corner positions per face."""
        return self.vertices[self.faces]

    def validate(self) -> None:
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= self.n_vertices):
            raise IndexError("face vertex index out of range")
        f = self.faces
        if f.size and np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise SchemaError("a face repeats a vertex index")


@dataclasses.dataclass
class TexelGrid:
    """8-bit RGB texel array. coverage marks texels written by the bake
    proper (gutter fill and borders stay uncovered)."""

    data: np.ndarray  # (h, w, 3) uint8, row 0 = top
    coverage: np.ndarray  # (h, w) bool

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def new_texel_grid(width: int, height: int | None = None) -> TexelGrid:
    height = width if height is None else height
    return TexelGrid(
        data=np.zeros((height, width, 3), dtype=np.uint8),
        coverage=np.zeros((height, width), dtype=bool),
    )


def uv_to_texel(u, v, width: int, height: int):
    """Texel (row, col) containing a UV position; clamps to the valid range."""
    col = np.clip(np.floor(np.asarray(u) * width).astype(np.int64), 0, width - 1)
    row = height - 1 - np.clip(np.floor(np.asarray(v) * height).astype(np.int64), 0, height - 1)
    return row, col


def texel_center_uv(rows, cols, width: int, height: int):
    """UV coordinates of texel centers; inverse of uv_to_texel up to the half-texel."""
    u = (np.asarray(cols) + 0.5) / width
    v = (height - np.asarray(rows) - 0.5) / height
    return u, v


# ---------------------------------------------------------------------------
# PLY point clouds


_PLY_SCALAR_SIZES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_REQUIRED_FLOAT = ("x", "y", "z", "nx", "ny", "nz")
_REQUIRED_UCHAR = ("red", "green", "blue")


def _parse_ply_header(fh):
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise SchemaError("not a PLY file (missing 'ply' magic)")
    fmt = None
    elements = []  # (name, count, [(prop_name, type_str)])
    while True:
        raw = fh.readline()
        if not raw:
            raise TruncatedFile("PLY header ends before end_header")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        if line == "end_header":
            break
        parts = line.split()
        if parts[0] == "format":
            if parts[1] == "ascii":
                fmt = "ascii"
            elif parts[1] == "binary_little_endian":
                fmt = "binary"
            else:
                raise UnsupportedFormat(f"PLY format '{parts[1]}' is not supported")
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise SchemaError("PLY property before any element")
            if parts[1] == "list":
                elements[-1][2].append((parts[-1], "list"))
            else:
                elements[-1][2].append((parts[-1], parts[1]))
    if fmt is None:
        raise SchemaError("PLY header has no format line")
    if not elements or elements[0][0] != "vertex":
        raise UnsupportedFormat("PLY vertex element must be the first element")
    return fmt, elements


def _vertex_dtype(props):
    names = [p[0] for p in props]
    for req in _REQUIRED_FLOAT:
        if req not in names:
            raise SchemaError(f"missing required vertex property '{req}'")
        t = props[names.index(req)][1]
        if t not in ("float", "float32", "double", "float64"):
            raise SchemaError(f"vertex property '{req}' must be float or double, got '{t}'")
    for req in _REQUIRED_UCHAR:
        if req not in names:
            raise SchemaError(f"missing required vertex property '{req}'")
        t = props[names.index(req)][1]
        if t not in ("uchar", "uint8"):
            raise SchemaError(f"vertex property '{req}' must be uchar, got '{t}'")
    fields = []
    for name, t in props:
        if t == "list":
            raise UnsupportedFormat("list properties in the vertex element are not supported")
        if t not in _PLY_SCALAR_SIZES:
            raise UnsupportedFormat(f"PLY property type '{t}' is not supported")
        fields.append((name, "<" + _PLY_SCALAR_SIZES[t]))
    return np.dtype(fields)


def read_pointcloud(path) -> PointCloud:
    """Load a PLY point cloud (ascii or binary little-endian).

    Requires float x/y/z/nx/ny/nz and uchar red/green/blue in the vertex
    element; extra scalar properties are skipped. Points whose stored normal
    has zero length are dropped and counted in `dropped_points`; survivors'
    normals are renormalized.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        _, count, props = elements[0]
        dtype = _vertex_dtype(props)
        if fmt == "binary":
            raw = fh.read(count * dtype.itemsize)
            if len(raw) < count * dtype.itemsize:
                raise TruncatedFile(
                    f"PLY body holds {len(raw) // max(dtype.itemsize, 1)} of {count} vertices"
                )
            rec = np.frombuffer(raw, dtype=dtype, count=count)
        else:
            names = [p[0] for p in props]
            rows = np.empty((count, len(names)), dtype=np.float64)
            got = 0
            for raw_line in fh:
                line = raw_line.strip()
                if not line:
                    continue
                toks = line.split()
                if len(toks) < len(names):
                    raise SchemaError(f"PLY vertex line has {len(toks)} values, expected {len(names)}")
                rows[got] = [float(tk) for tk in toks[: len(names)]]
                got += 1
                if got == count:
                    break
            if got < count:
                raise TruncatedFile(f"PLY body holds {got} of {count} vertices")
            rec = np.rec.fromarrays(rows.T, dtype=np.dtype([(n, "<f8") for n in names]))

    positions = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    normals = np.stack([rec["nx"], rec["ny"], rec["nz"]], axis=1).astype(np.float64)
    colors = np.stack([rec["red"], rec["green"], rec["blue"]], axis=1).astype(np.uint8)

    norms = np.linalg.norm(normals, axis=1)
    keep = norms > 1e-12
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        positions, normals, colors, norms = (
            positions[keep], normals[keep], colors[keep], norms[keep],
        )
    normals = normals / norms[:, None]
    cloud = PointCloud(positions, normals, colors, dropped_points=dropped)
    cloud.validate()
    return cloud


def write_pointcloud(path, cloud: PointCloud, binary: bool = True) -> None:
    """Write a PLY point cloud; positions and normals are stored as float32."""
    n = len(cloud)
    header = [
        "ply",
        "format binary_little_endian 1.0" if binary else "format ascii 1.0",
        f"element vertex {n}",
        "property float x", "property float y", "property float z",
        "property float nx", "property float ny", "property float nz",
        "property uchar red", "property uchar green", "property uchar blue",
        "end_header",
    ]
    rec = np.empty(
        n,
        dtype=[(k, "<f4") for k in _REQUIRED_FLOAT] + [(k, "u1") for k in _REQUIRED_UCHAR],
    )
    for i, k in enumerate(("x", "y", "z")):
        rec[k] = cloud.positions[:, i].astype(np.float32)
        rec["n" + k] = cloud.normals[:, i].astype(np.float32)
    for i, k in enumerate(_REQUIRED_UCHAR):
        rec[k] = cloud.colors[:, i]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(rec.tobytes())
        else:
            cols = [rec[k] for k in rec.dtype.names]
            lines = []
            for row in zip(*cols):
                lines.append(
                    " ".join(f"{v:.9g}" for v in row[:6]) + " " + " ".join(str(int(v)) for v in row[6:])
                )
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


# ---------------------------------------------------------------------------
# OBJ meshes


def read_mesh(path) -> TriangleMesh:
    """Load a triangle-only OBJ.

    Supports `v` (with the optional 6-float color extension), `vn`, `vt` and
    `f v/vt/vn` faces. Color usage and per-corner vt/vn usage must be
    consistent across the file. Face indices are 1-based; anything out of
    range (including negative relative indices) raises IndexError.
    """
    v_rows: list[float] = []
    v_width = None
    vn_rows: list[float] = []
    vt_rows: list[float] = []
    f_v: list[int] = []
    f_vt: list[int] = []
    f_vn: list[int] = []
    f_has_vt = None
    f_has_vn = None

    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line or line[0] in "#\n":
                continue
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) not in (4, 7):
                    raise SchemaError(
                        f"line {lineno}: 'v' must carry 3 coordinates or 3+3 with color"
                    )
                if v_width is None:
                    v_width = len(parts) - 1
                elif v_width != len(parts) - 1:
                    raise SchemaError("inconsistent vertex color usage across 'v' lines")
                v_rows.extend(float(p) for p in parts[1:])
            elif tag == "vn":
                if len(parts) != 4:
                    raise SchemaError(f"line {lineno}: 'vn' must carry 3 components")
                vn_rows.extend(float(p) for p in parts[1:])
            elif tag == "vt":
                if len(parts) < 3:
                    raise SchemaError(f"line {lineno}: 'vt' must carry 2 components")
                vt_rows.extend((float(parts[1]), float(parts[2])))
            elif tag == "f":
                refs = parts[1:]
                if len(refs) != 3:
                    raise NonTriangleFace(lineno, len(refs))
                for ref in refs:
                    fields = ref.split("/")
                    f_v.append(int(fields[0]))
                    has_vt = len(fields) >= 2 and fields[1] != ""
                    has_vn = len(fields) >= 3 and fields[2] != ""
                    if f_has_vt is None:
                        f_has_vt, f_has_vn = has_vt, has_vn
                    elif (f_has_vt, f_has_vn) != (has_vt, has_vn):
                        raise SchemaError("inconsistent face reference format (vt/vn usage)")
                    if has_vt:
                        f_vt.append(int(fields[1]))
                    if has_vn:
                        f_vn.append(int(fields[2]))
            # other tags (o, g, s, usemtl, mtllib, ...) are ignored

    if v_width is None:
        raise SchemaError("OBJ file has no vertices")
    vdata = np.array(v_rows, dtype=np.float64).reshape(-1, v_width)
    vertices = vdata[:, :3]
    colors = vdata[:, 3:6] * 255.0 if v_width == 6 else None

    faces = np.array(f_v, dtype=np.int64).reshape(-1, 3)
    if faces.size:
        if faces.min() < 1 or faces.max() > vertices.shape[0]:
            raise IndexError("face vertex index out of range")
        faces = faces - 1

    uvs = None
    if f_has_vt:
        vt = np.array(vt_rows, dtype=np.float64).reshape(-1, 2)
        ti = np.array(f_vt, dtype=np.int64).reshape(-1, 3)
        if ti.min() < 1 or ti.max() > vt.shape[0]:
            raise IndexError("face texture index out of range")
        uvs = vt[ti - 1]

    normals = None
    if f_has_vn:
        vn = np.array(vn_rows, dtype=np.float64).reshape(-1, 3)
        ni = np.array(f_vn, dtype=np.int64).reshape(-1, 3)
        if ni.min() < 1 or ni.max() > vn.shape[0]:
            raise IndexError("face normal index out of range")
        normals = np.zeros((vertices.shape[0], 3), dtype=np.float64)
        normals[faces.reshape(-1)] = vn[ni.reshape(-1) - 1]

    mesh = TriangleMesh(vertices=vertices, faces=faces, normals=normals, colors=colors, uvs=uvs)
    mesh.validate()
    return mesh


def _fmt9(values) -> str:
    return " ".join(f"{v:.9g}" for v in values)


def write_mesh(path, mesh: TriangleMesh) -> None:
    """Write an OBJ with 9-significant-digit decimals.

    Vertex colors (if any) are emitted as the 6-float `v` extension scaled to
    0..1; UVs as 3 `vt` records per face referenced v/vt[/vn]; normals as one
    `vn` per vertex referenced by vertex index.
    """
    chunks: list[str] = []
    if mesh.colors is not None:
        scaled = mesh.colors / 255.0
        chunks.extend(
            f"v {_fmt9(p)} {_fmt9(c)}" for p, c in zip(mesh.vertices, scaled)
        )
    else:
        chunks.extend(f"v {_fmt9(p)}" for p in mesh.vertices)
    if mesh.normals is not None:
        chunks.extend(f"vn {_fmt9(nc)}" for nc in mesh.normals)
    if mesh.uvs is not None:
        chunks.extend(f"vt {_fmt9(uv)}" for uv in mesh.uvs.reshape(-1, 2))

    fv = mesh.faces + 1
    has_t = mesh.uvs is not None
    has_n = mesh.normals is not None
    for fi in range(mesh.n_faces):
        a, b, c = fv[fi]
        if has_t and has_n:
            t0 = 3 * fi + 1
            chunks.append(f"f {a}/{t0}/{a} {b}/{t0 + 1}/{b} {c}/{t0 + 2}/{c}")
        elif has_t:
            t0 = 3 * fi + 1
            chunks.append(f"f {a}/{t0} {b}/{t0 + 1} {c}/{t0 + 2}")
        elif has_n:
            chunks.append(f"f {a}//{a} {b}//{b} {c}//{c}")
        else:
            chunks.append(f"f {a} {b} {c}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(chunks) + "\n")


# ---------------------------------------------------------------------------
# PNG images


def read_image(path) -> TexelGrid:
    """Load an 8-bit RGB PNG; anything else (alpha, palette, 16-bit) is refused."""
    with Image.open(path) as img:
        if img.format != "PNG":
            raise UnsupportedFormat(f"expected PNG, got {img.format}")
        if img.mode != "RGB":
            raise UnsupportedFormat(f"expected 8-bit RGB, got mode '{img.mode}'")
        data = np.asarray(img, dtype=np.uint8)
    return TexelGrid(data=data, coverage=np.ones(data.shape[:2], dtype=bool))


def write_image(path, grid: TexelGrid) -> None:
    Image.fromarray(grid.data, "RGB").save(path, format="PNG")
