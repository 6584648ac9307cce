"""Image error metrics for comparing rendered frames and baked maps."""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError

__all__ = ["rmse", "psnr", "format_psnr"]


def _as_image(x) -> np.ndarray:
    data = getattr(x, "data", x)
    return np.asarray(data, dtype=np.float64)


def rmse(a, b) -> float:
    """Root-mean-square difference over every channel of every texel."""
    ia, ib = _as_image(a), _as_image(b)
    if ia.shape != ib.shape:
        raise DimensionError(f"image shapes differ: {ia.shape} vs {ib.shape}")
    return float(np.sqrt(np.mean((ia - ib) ** 2)))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB against a 255 peak; +inf for
    identical images (callers print it via format_psnr)."""
    r = rmse(a, b)
    if r == 0.0:
        return math.inf
    return 20.0 * math.log10(255.0 / r)


def format_psnr(value: float) -> str:
    """Serialize a PSNR for reports: infinite means the images were identical."""
    return "identical" if math.isinf(value) else f"{value:.6g}"
