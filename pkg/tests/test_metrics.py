import math

import numpy as np
import pytest

from pointbake.assets import TexelGrid
from pointbake.errors import DimensionError
from pointbake.metrics import format_psnr, psnr, rmse

from conftest import make_rng


def grid_of(arr) -> TexelGrid:
    arr = np.asarray(arr, dtype=np.uint8)
    return TexelGrid(data=arr, coverage=np.ones(arr.shape[:2], dtype=bool))


class TestRmse:
    def test_identical_is_zero(self):
        a = np.full((4, 4, 3), 17, dtype=np.uint8)
        assert rmse(a, a.copy()) == 0.0

    def test_full_range(self):
        a = np.zeros((8, 8, 3), dtype=np.uint8)
        b = np.full((8, 8, 3), 255, dtype=np.uint8)
        assert rmse(a, b) == 255.0

    def test_hand_case_2x2(self):
        a = np.zeros((2, 2, 3), dtype=np.uint8)
        b = np.arange(1, 13, dtype=np.uint8).reshape(2, 2, 3)
        # mean of squares 1..12 is 650/12
        assert rmse(a, b) == pytest.approx(math.sqrt(650.0 / 12.0), abs=1e-12)

    def test_triangle_inequality(self):
        rng = make_rng(61)
        a, b, c = (rng.integers(0, 256, size=(6, 6, 3)).astype(np.uint8) for _ in range(3))
        assert rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionError):
            rmse(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))

    def test_texel_grid_inputs(self):
        a = grid_of(np.full((3, 3, 3), 10))
        b = np.full((3, 3, 3), 13, dtype=np.uint8)
        assert rmse(a, b) == 3.0


class TestPsnr:
    def test_identical_is_infinite(self):
        a = np.full((4, 4, 3), 99, dtype=np.uint8)
        assert math.isinf(psnr(a, a.copy()))
        assert format_psnr(psnr(a, a.copy())) == "identical"

    def test_full_range_is_zero_db(self):
        a = np.zeros((4, 4, 3), dtype=np.uint8)
        b = np.full((4, 4, 3), 255, dtype=np.uint8)
        assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        rng = make_rng(62)
        a = rng.integers(0, 256, size=(5, 5, 3)).astype(np.uint8)
        b = rng.integers(0, 256, size=(5, 5, 3)).astype(np.uint8)
        assert psnr(a, b) == psnr(b, a)

    def test_known_value(self):
        a = np.zeros((2, 2, 3), dtype=np.uint8)
        b = np.full((2, 2, 3), 51, dtype=np.uint8)
        assert psnr(a, b) == pytest.approx(20.0 * math.log10(255.0 / 51.0), abs=1e-12)

    def test_format_finite(self):
        assert format_psnr(31.4159265) == "31.4159"
