import math

import numpy as np
import pytest

from zsdn.errors import OutOfBoundsError, ShapeMismatchError, ValidationError
from zsdn.metrics import error_map, line_profile, psnr, ssim
from zsdn.phantom import LatticeSpec, generate_lattice


def ssim_direct_oracle(ref, test, data_range=1.0):
    """Windowed SSIM via an explicit per-window loop (independent of the
    separable-convolution implementation path)."""
    x = ref.astype(np.float64)
    y = test.astype(np.float64)
    g1 = np.exp(-((np.arange(11) - 5.0) ** 2) / (2 * 1.5**2))
    win = np.outer(g1, g1)
    win /= win.sum()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    vals = []
    for i in range(x.shape[0] - 10):
        for j in range(x.shape[1] - 10):
            wx = x[i : i + 11, j : j + 11]
            wy = y[i : i + 11, j : j + 11]
            mx = (win * wx).sum()
            my = (win * wy).sum()
            vx = (win * wx * wx).sum() - mx * mx
            vy = (win * wy * wy).sum() - my * my
            cov = (win * wx * wy).sum() - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


class TestPsnr:
    def test_identical_is_infinite(self):
        img = np.random.default_rng(0).random((16, 16)).astype(np.float32)
        assert psnr(img, img) == math.inf

    def test_constant_offset(self):
        ref = np.zeros((8, 8), np.float32)
        test = np.full((8, 8), 0.1, np.float32)
        assert psnr(ref, test, 1.0) == pytest.approx(20.0, abs=1e-6)

    def test_scalar_loop_oracle(self):
        rng = np.random.default_rng(1)
        ref = rng.random((24, 24)).astype(np.float32)
        test = rng.random((24, 24)).astype(np.float32)
        acc = 0.0
        for i in range(24):
            for j in range(24):
                acc += (float(ref[i, j]) - float(test[i, j])) ** 2
        expect = 10 * math.log10(1.0 / (acc / 576))
        assert psnr(ref, test, 1.0) == pytest.approx(expect, abs=1e-9)

    def test_symmetric_in_mse(self):
        rng = np.random.default_rng(2)
        a = rng.random((12, 12)).astype(np.float32)
        b = rng.random((12, 12)).astype(np.float32)
        assert psnr(a, b) == psnr(b, a)

    def test_errors(self):
        with pytest.raises(ShapeMismatchError):
            psnr(np.zeros((4, 4), np.float32), np.zeros((4, 5), np.float32))
        with pytest.raises(ValidationError):
            psnr(np.zeros((4, 4), np.float32), np.zeros((4, 4), np.float32), 0.0)


class TestSsim:
    def test_identical_is_one(self):
        img = np.random.default_rng(3).random((16, 16)).astype(np.float32)
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_anticorrelated_negative(self):
        rng = np.random.default_rng(4)
        ref = (rng.random((24, 24)) > 0.5).astype(np.float32)
        assert ssim(ref, 1.0 - ref) < 0.0

    def test_direct_window_oracle(self):
        rng = np.random.default_rng(5)
        ref = rng.random((32, 32)).astype(np.float32)
        test = np.clip(ref + 0.1 * rng.standard_normal((32, 32)), 0, 1).astype(np.float32)
        assert ssim(ref, test) == pytest.approx(ssim_direct_oracle(ref, test), abs=1e-6)

    def test_too_small(self):
        with pytest.raises(ValidationError):
            ssim(np.zeros((10, 12), np.float32), np.zeros((10, 12), np.float32))

    def test_range(self):
        rng = np.random.default_rng(6)
        a = rng.random((20, 20)).astype(np.float32)
        b = rng.random((20, 20)).astype(np.float32)
        assert -1.0 <= ssim(a, b) <= 1.0


class TestErrorMap:
    def test_identical(self):
        img = np.random.default_rng(7).random((8, 8)).astype(np.float32)
        assert error_map(img, img).max() == 0.0

    def test_constant_shift(self):
        img = np.random.default_rng(8).random((8, 8)).astype(np.float32)
        np.testing.assert_allclose(error_map(img, img + 0.25), 0.25, rtol=1e-6)

    def test_max_matches_scalar_loop(self):
        rng = np.random.default_rng(9)
        a = rng.random((16, 16)).astype(np.float32)
        b = rng.random((16, 16)).astype(np.float32)
        worst = max(abs(float(a[i, j]) - float(b[i, j])) for i in range(16) for j in range(16))
        assert error_map(a, b).max() == pytest.approx(worst, abs=1e-7)


class TestLineProfile:
    def test_constant_image(self):
        img = np.full((6, 6), 0.3, np.float32)
        np.testing.assert_array_equal(line_profile(img, "row", 2), np.full(6, 0.3, np.float32))

    def test_row_of_2x2(self):
        img = np.array([[1.0, 2.0], [3.0, 4.0]], np.float32)
        np.testing.assert_array_equal(line_profile(img, "row", 0), [1.0, 2.0])
        np.testing.assert_array_equal(line_profile(img, "col", 1), [2.0, 4.0])

    def test_profile_peaks_at_atom_center(self):
        spec = LatticeSpec(
            height=33, width=33, vec1=(100.0, 0.0), vec2=(0.0, 100.0),
            sigma=2.0, basis=((0.16, 0.16, 1.0),), background=0.0,
        )
        img = generate_lattice(spec)  # single atom at (16, 16)
        profile = line_profile(img, "row", 16)
        assert abs(int(np.argmax(profile)) - 16) <= 1

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBoundsError):
            line_profile(np.zeros((4, 4), np.float32), "row", 4)
        with pytest.raises(ValidationError):
            line_profile(np.zeros((4, 4), np.float32), "diag", 0)
