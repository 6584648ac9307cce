"""Exception types shared across the package.

Every error raised on a malformed input carries a human-readable message;
the CLI maps these classes onto its exit codes (data/format errors -> 3,
configuration errors -> 4).
"""

__all__ = [
    "PointbakeError",
    "ConfigError",
    "DataError",
    "DegenerateTriangle",
    "SchemaError",
    "TruncatedFile",
    "NonTriangleFace",
    "UnsupportedFormat",
    "MissingUVs",
    "AtlasOverflow",
    "DimensionError",
    "ManifestError",
]


class PointbakeError(Exception):
    """Base class for all package errors."""


class ConfigError(PointbakeError):
    """A parameter value is outside its documented domain."""


class DataError(PointbakeError):
    """Base class for malformed input data."""


class DegenerateTriangle(DataError):
    """Triangle area is below the degeneracy threshold."""


class SchemaError(DataError):
    """A file is missing a required element or property (named in the message)."""


class TruncatedFile(DataError):
    """A file ends before the record count announced in its header."""


class NonTriangleFace(DataError):
    """An OBJ face has more or fewer than three corners."""

    def __init__(self, line_number: int, ncorners: int):
        self.line_number = line_number
        super().__init__(
            f"face on line {line_number} has {ncorners} corners; only triangles are supported"
        )


class UnsupportedFormat(DataError):
    """An image or container format we do not read (e.g. 16-bit or paletted PNG)."""


class MissingUVs(DataError):
    """Baking was requested on a mesh without UVs."""


class AtlasOverflow(ConfigError):
    """Charts cannot be packed at the requested resolution.

    Carries the minimum resolution at which packing succeeds.
    """

    def __init__(self, resolution: int, min_feasible: int):
        self.min_feasible = min_feasible
        super().__init__(
            f"cannot pack charts at {resolution}x{resolution}; "
            f"minimum feasible resolution is {min_feasible}"
        )


class DimensionError(DataError):
    """Two images that must share a shape do not."""


class ManifestError(DataError):
    """A scene manifest is missing a field (named in the message)."""
