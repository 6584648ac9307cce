"""pointbake: bake texture and normal maps for low-poly meshes straight from
colored point clouds, plus the baselines and benchmark harness to compare
against mesh-based transfer."""

from .assets import (
    PointCloud,
    TexelGrid,
    TriangleMesh,
    new_texel_grid,
    read_image,
    read_mesh,
    read_pointcloud,
    write_image,
    write_mesh,
    write_pointcloud,
)
from .atlas import UVAtlas, unwrap_per_triangle, validate_atlas
from .baselines import bake_from_mesh, bake_lpm
from .bench import profile_pipeline
from .errors import (
    AtlasOverflow,
    ConfigError,
    DataError,
    DegenerateTriangle,
    DimensionError,
    ManifestError,
    MissingUVs,
    NonTriangleFace,
    PointbakeError,
    SchemaError,
    TruncatedFile,
    UnsupportedFormat,
)
from .metrics import format_psnr, psnr, rmse
from .render import Camera, RenderedFrame, render
from .synth import SCENE_KINDS, Scene, synth_scene, write_scene
from .transfer import BakeConfig, BakeResult, bake_all

__version__ = "0.1.0"
