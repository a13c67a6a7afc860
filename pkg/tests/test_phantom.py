import json
import struct

import numpy as np
import pytest

from zsdn.errors import FormatError, ValidationError
from zsdn.phantom import LatticeSpec, generate_lattice, load_image, read_sidecar, save_image


def single_atom_spec(**kw):
    base = dict(
        height=64, width=64, vec1=(1000.0, 0.0), vec2=(0.0, 1000.0),
        sigma=2.0, amplitude=1.0, basis=((0.032, 0.032, 1.0),), background=0.0,
    )
    base.update(kw)
    return LatticeSpec(**base)


class TestGenerateLattice:
    def test_single_atom_peak_location(self):
        img = generate_lattice(single_atom_spec())
        assert np.unravel_index(np.argmax(img), img.shape) == (32, 32)

    def test_zero_amplitude_constant_background(self):
        img = generate_lattice(single_atom_spec(amplitude=0.0, background=0.2))
        np.testing.assert_allclose(img, 1.0)  # normalized flat field

    def test_bump_integral_matches_gaussian(self):
        """An isolated normalized bump integrates to 2*pi*sigma^2 within 1%."""
        img = generate_lattice(single_atom_spec()).astype(np.float64)
        expect = 2 * np.pi * 2.0**2
        assert abs(img.sum() - expect) / expect < 0.01

    def test_normalization(self):
        spec = LatticeSpec(height=48, width=48, sigma=1.5, background=0.1, jitter_sigma=0.2)
        img = generate_lattice(spec)
        assert img.min() >= 0.0
        assert img.max() == pytest.approx(1.0)

    def test_deterministic_under_seed(self):
        spec = LatticeSpec(height=32, width=32, jitter_sigma=0.5, seed=11)
        np.testing.assert_array_equal(generate_lattice(spec), generate_lattice(spec))
        other = generate_lattice(LatticeSpec(height=32, width=32, jitter_sigma=0.5, seed=12))
        assert np.any(other != generate_lattice(spec))

    def test_degenerate_vectors_rejected(self):
        with pytest.raises(ValidationError):
            generate_lattice(LatticeSpec(height=8, width=8, vec1=(2.0, 4.0), vec2=(1.0, 2.0)))

    def test_basis_occupancy_scales_brightness(self):
        bright = generate_lattice(single_atom_spec())
        dim = generate_lattice(single_atom_spec(basis=((0.032, 0.032, 0.5),), background=0.5))
        # dim site peaks at 0.5 atop a 0.5 background before normalization
        assert dim.max() == pytest.approx(1.0)
        assert bright.sum() > dim.astype(np.float64).sum() - dim.size * 0.5


class TestRawContainer:
    def test_round_trip_bit_exact(self, tmp_path):
        img = np.random.default_rng(0).standard_normal((17, 23)).astype(np.float32)
        path = str(tmp_path / "img.f32")
        save_image(img, path, data_range=2.5)
        np.testing.assert_array_equal(load_image(path), img)
        header = read_sidecar(path)
        assert header["height"] == 17 and header["width"] == 23
        assert header["data_range"] == 2.5

    def test_independent_minimal_reader(self, tmp_path):
        """Cross-check the loader against a from-scratch reader of the format."""
        img = np.random.default_rng(1).random((9, 5)).astype(np.float32)
        path = str(tmp_path / "img.f32")
        save_image(img, path)
        with open(path + ".json") as fh:
            meta = json.load(fh)
        with open(path, "rb") as fh:
            raw = fh.read()
        assert len(raw) == meta["height"] * meta["width"] * 4
        vals = struct.unpack("<" + "f" * (meta["height"] * meta["width"]), raw)
        manual = np.array(vals, np.float32).reshape(meta["height"], meta["width"])
        np.testing.assert_array_equal(manual, load_image(path))

    def test_malformed_sidecar(self, tmp_path):
        path = str(tmp_path / "img.f32")
        save_image(np.ones((4, 4), np.float32), path)
        with open(path + ".json", "w") as fh:
            fh.write("{not json")
        with pytest.raises(FormatError):
            load_image(path)

    def test_truncated_data(self, tmp_path):
        path = str(tmp_path / "img.f32")
        save_image(np.ones((4, 4), np.float32), path)
        with open(path, "wb") as fh:
            fh.write(b"\x00" * 10)
        with pytest.raises(FormatError):
            load_image(path)

    def test_dimension_overflow_rejected(self, tmp_path):
        path = str(tmp_path / "img.f32")
        save_image(np.ones((4, 4), np.float32), path)
        with open(path + ".json", "w") as fh:
            json.dump({"height": 2**20, "width": 2**20, "dtype": "float32"}, fh)
        with pytest.raises(FormatError):
            load_image(path)


class TestPng:
    def test_16bit_constant_half(self, tmp_path):
        path = str(tmp_path / "img.png")
        save_image(np.full((8, 8), 0.5, np.float32), path, bits=16)
        from PIL import Image as PILImage

        codes = np.array(PILImage.open(path))
        assert np.all(np.abs(codes.astype(np.int64) - 32768) <= 1)

    def test_16bit_round_trip_quantization(self, tmp_path):
        img = np.random.default_rng(2).random((12, 12)).astype(np.float32)
        path = str(tmp_path / "img.png")
        save_image(img, path, bits=16)
        np.testing.assert_allclose(load_image(path), img, atol=1.01 / 65535)

    def test_8bit_round_trip_quantization(self, tmp_path):
        img = np.random.default_rng(3).random((12, 12)).astype(np.float32)
        path = str(tmp_path / "img.png")
        save_image(img, path, bits=8)
        np.testing.assert_allclose(load_image(path), img, atol=1.01 / 255)

    def test_unsupported_extension(self, tmp_path):
        with pytest.raises(FormatError):
            save_image(np.ones((4, 4), np.float32), str(tmp_path / "img.tiff"))
        with pytest.raises(FormatError):
            load_image(str(tmp_path / "img.bmp"))
