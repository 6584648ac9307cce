"""Shared test helpers: pinned RNG construction and shape samplers.

All randomized tests draw from numpy's PCG64 with an explicit seed so reruns
are bit-identical. Random triangles carry a thinness floor (min altitude at
least 1e-2 of the longest edge): the package's tolerance contracts assume
non-degenerate triangles, and conditioning of barycentric solves degrades as
1/quality^2.
"""
from __future__ import annotations

import numpy as np
import pytest


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def triangle_quality(t: np.ndarray) -> float:
    """min altitude / longest edge = 2*area / longest_edge^2."""
    e = np.array([t[1] - t[0], t[2] - t[1], t[0] - t[2]])
    longest = np.linalg.norm(e, axis=1).max()
    area = 0.5 * np.linalg.norm(np.cross(t[1] - t[0], t[2] - t[0]))
    if longest == 0.0:
        return 0.0
    return float(2.0 * area / longest**2)


def random_triangle(rng: np.random.Generator, lo=-1.0, hi=1.0, min_quality=1e-2) -> np.ndarray:
    while True:
        t = rng.uniform(lo, hi, (3, 3))
        if triangle_quality(t) >= min_quality:
            return t


def random_unit(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    shape = (3,) if n is None else (n, 3)
    while True:
        v = rng.normal(size=shape)
        norms = np.linalg.norm(v, axis=-1, keepdims=True)
        if np.all(norms > 1e-6):
            return v / norms


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(20260818)
