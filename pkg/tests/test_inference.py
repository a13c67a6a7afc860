import numpy as np
import pytest

from zsdn.errors import ValidationError
from zsdn.inference import MMSEConfig, denoise_mmse, denoise_once
from zsdn.network import NetConfig, init_model
from zsdn.rng import derive_seed
from zsdn.subsampler import SamplerConfig

NET = NetConfig(stride=2, base_channels=8, depth=2, feature_channels=16)


@pytest.fixture(scope="module")
def model():
    return init_model(NET, seed=21)


@pytest.fixture(scope="module")
def noisy():
    return (np.random.default_rng(22).random((64, 64)) + 0.05).astype(np.float32)


class TestDenoiseOnce:
    def test_zero_final_layer_constant(self, noisy):
        m = init_model(NET, seed=23)
        m.weights["head3.w"][:] = 0.0
        m.weights["head3.b"][:] = 0.375
        out = denoise_once(m, noisy, SamplerConfig(stride=2, seed=24))
        np.testing.assert_allclose(out, 0.375, rtol=1e-6)

    def test_same_seed_identical(self, model, noisy):
        cfg = SamplerConfig(stride=2, seed=25)
        np.testing.assert_array_equal(
            denoise_once(model, noisy, cfg), denoise_once(model, noisy, cfg)
        )

    def test_different_seed_differs(self, model, noisy):
        a = denoise_once(model, noisy, SamplerConfig(stride=2, seed=26))
        b = denoise_once(model, noisy, SamplerConfig(stride=2, seed=27))
        assert np.any(a != b)

    def test_output_shape_and_crop(self, model):
        # 70x66 center-crops to 64x64 (stride * 2^depth = 8)
        img = np.random.default_rng(28).random((70, 66)).astype(np.float32)
        out = denoise_once(model, img, SamplerConfig(stride=2, seed=29))
        assert out.shape == (64, 64)

    def test_stride_mismatch(self, model, noisy):
        with pytest.raises(ValidationError):
            denoise_once(model, noisy, SamplerConfig(stride=3, seed=30))


class TestDenoiseMmse:
    def test_m1_equals_single_draw_with_derived_seed(self, model, noisy):
        cfg = MMSEConfig(m=1, sampler=SamplerConfig(stride=2, seed=31))
        direct = denoise_once(model, noisy, SamplerConfig(stride=2, seed=derive_seed(31, 0)))
        np.testing.assert_allclose(denoise_mmse(model, noisy, cfg), direct, atol=1e-7)

    def test_fixed_strategy_mean_equals_one_draw(self, model, noisy):
        sampler = SamplerConfig(stride=2, strategy="fixed", fixed_offset=2, seed=32)
        out = denoise_mmse(model, noisy, MMSEConfig(m=7, sampler=sampler))
        one = denoise_once(model, noisy, sampler)
        np.testing.assert_allclose(out, one, atol=1e-6)

    def test_linearity_of_ensemble_mean(self, model, noisy):
        """The ensemble output equals the float64 mean of its member draws."""
        m = 6
        cfg = MMSEConfig(m=m, sampler=SamplerConfig(stride=2, seed=33))
        out = denoise_mmse(model, noisy, cfg)
        acc = np.zeros((64, 64), np.float64)
        for i in range(m):
            acc += denoise_once(
                model, noisy, SamplerConfig(stride=2, seed=derive_seed(33, i))
            ).astype(np.float64)
        np.testing.assert_allclose(out, (acc / m).astype(np.float32), atol=1e-6)

    def test_variance_reduction(self, model, noisy):
        """Disjoint 5-draw ensemble means vary less across repeats than single draws."""
        singles = [
            denoise_once(model, noisy, SamplerConfig(stride=2, seed=derive_seed(34, i)))
            for i in range(10)
        ]
        singles = np.stack(singles).astype(np.float64)
        var_single = singles.var(axis=0).mean()
        means = np.stack([singles[:5].mean(axis=0), singles[5:].mean(axis=0)])
        var_mean = means.var(axis=0).mean()
        assert var_mean < var_single / 2

    def test_m_validation(self, model, noisy):
        with pytest.raises(ValidationError):
            denoise_mmse(model, noisy, MMSEConfig(m=0))


class TestTiling:
    def test_tiled_matches_full_in_interior(self, model, noisy):
        cfg = SamplerConfig(stride=2, seed=35)
        full = denoise_once(model, noisy, cfg)
        tiled = denoise_once(model, noisy, cfg, tile=16, tile_halo=8)
        assert tiled.shape == full.shape
        # seams differ only within the halo approximation
        assert float(np.abs(tiled - full).mean()) < 2e-3

    def test_tiled_deterministic(self, model, noisy):
        cfg = SamplerConfig(stride=2, seed=36)
        a = denoise_once(model, noisy, cfg, tile=16, tile_halo=8)
        b = denoise_once(model, noisy, cfg, tile=16, tile_halo=8)
        np.testing.assert_array_equal(a, b)

    def test_mmse_with_tiling(self, model, noisy):
        cfg = MMSEConfig(m=2, sampler=SamplerConfig(stride=2, seed=37), tile=16, tile_halo=8)
        out = denoise_mmse(model, noisy, cfg)
        assert out.shape == (64, 64)
        assert np.isfinite(out).all()
