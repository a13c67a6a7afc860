"""Synthetic atomic-lattice phantoms and image file I/O.

The phantom mimics high-resolution micrograph statistics: bright isotropic
Gaussian peaks on a dark background, arranged on a 2-D lattice with optional
basis sites (partial occupancy via per-site amplitude scales) and positional
jitter. Generated images are normalized so max == 1 and min >= 0.

Two file formats are supported:

* ``.f32`` raw little-endian float32 with a JSON sidecar ``<path>.json``
  holding ``{height, width, dtype, data_range}`` - lossless, used by tests.
* ``.png`` 8- or 16-bit grayscale for human inspection - values are clipped
  to [0, data_range] and quantized.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .errors import FormatError, ValidationError
from .imagecore import DTYPE, as_image
from .rng import make_rng

__all__ = ["LatticeSpec", "generate_lattice", "save_image", "load_image", "read_sidecar"]


@dataclass(frozen=True)
class LatticeSpec:
    height: int
    width: int
    vec1: tuple[float, float] = (12.0, 2.0)   # (dy, dx) in pixels
    vec2: tuple[float, float] = (-2.0, 12.0)
    sigma: float = 1.6                        # atom width in pixels
    amplitude: float = 1.0
    basis: tuple[tuple[float, float, float], ...] = ((0.0, 0.0, 1.0),)  # (f1, f2, scale)
    background: float = 0.05
    jitter_sigma: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValidationError(f"dims must be positive, got {self.height}x{self.width}")
        det = self.vec1[0] * self.vec2[1] - self.vec1[1] * self.vec2[0]
        if abs(det) < 1e-9:
            raise ValidationError("lattice vectors are linearly dependent")
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.amplitude < 0 or self.background < 0 or self.jitter_sigma < 0:
            raise ValidationError("amplitude, background and jitter_sigma must be nonnegative")
        if any(scale < 0 for _, _, scale in self.basis):
            raise ValidationError("basis amplitude scales must be nonnegative")


def _site_centers(spec: LatticeSpec, margin: float) -> list[tuple[float, float, float]]:
    """All (cy, cx, scale) sites whose bump can touch the padded canvas."""
    v1 = np.array(spec.vec1, dtype=np.float64)
    v2 = np.array(spec.vec2, dtype=np.float64)
    basis = np.array([(f1, f2) for f1, f2, _ in spec.basis], dtype=np.float64)
    inv = np.linalg.inv(np.stack([v1, v2], axis=1))  # maps (y, x) -> lattice coords

    corners = np.array(
        [
            (-margin, -margin),
            (-margin, spec.width + margin),
            (spec.height + margin, -margin),
            (spec.height + margin, spec.width + margin),
        ]
    )
    # Basis offsets shift lattice coords by at most the unit cell, pad by 1.
    lat = corners @ inv.T
    m_lo, n_lo = np.floor(lat.min(axis=0)).astype(int) - 1
    m_hi, n_hi = np.ceil(lat.max(axis=0)).astype(int) + 1

    rng = make_rng(spec.seed)
    sites = []
    for m in range(m_lo, m_hi + 1):
        for n in range(n_lo, n_hi + 1):
            base = m * v1 + n * v2
            for (f1, f2), (_, _, scale) in zip(basis, spec.basis):
                cy, cx = base + f1 * v1 + f2 * v2
                if spec.jitter_sigma > 0:
                    jy, jx = rng.normal(0.0, spec.jitter_sigma, size=2)
                    cy += jy
                    cx += jx
                if -margin <= cy <= spec.height + margin and -margin <= cx <= spec.width + margin:
                    sites.append((cy, cx, scale))
    return sites


def generate_lattice(spec: LatticeSpec) -> np.ndarray:
    """Render the lattice phantom; deterministic under ``spec.seed``."""
    spec.validate()
    margin = 4.0 * spec.sigma + 4.0 * spec.jitter_sigma
    img = np.zeros((spec.height, spec.width), dtype=np.float64)
    ys = np.arange(spec.height, dtype=np.float64)
    xs = np.arange(spec.width, dtype=np.float64)
    two_sig2 = 2.0 * spec.sigma * spec.sigma

    for cy, cx, scale in _site_centers(spec, margin):
        amp = spec.amplitude * scale
        if amp == 0.0:
            continue
        y0 = max(int(np.floor(cy - margin)), 0)
        y1 = min(int(np.ceil(cy + margin)) + 1, spec.height)
        x0 = max(int(np.floor(cx - margin)), 0)
        x1 = min(int(np.ceil(cx + margin)) + 1, spec.width)
        if y0 >= y1 or x0 >= x1:
            continue
        gy = np.exp(-((ys[y0:y1] - cy) ** 2) / two_sig2)
        gx = np.exp(-((xs[x0:x1] - cx) ** 2) / two_sig2)
        img[y0:y1, x0:x1] += amp * np.outer(gy, gx)

    img += spec.background
    peak = img.max()
    if peak > 0:
        img /= peak
    return img.astype(DTYPE)


def save_image(img: np.ndarray, path: str, data_range: float = 1.0, bits: int = 16) -> None:
    """Write ``img`` to ``path``; format chosen by extension (.f32 or .png)."""
    img = as_image(img)
    if data_range <= 0:
        raise ValidationError(f"data_range must be positive, got {data_range}")
    ext = os.path.splitext(path)[1].lower()
    if ext == ".f32":
        with open(path, "wb") as fh:
            fh.write(img.astype("<f4").tobytes())
        header = {
            "height": int(img.shape[0]),
            "width": int(img.shape[1]),
            "dtype": "float32",
            "data_range": float(data_range),
        }
        with open(path + ".json", "w") as fh:
            json.dump(header, fh)
            fh.write("\n")
    elif ext == ".png":
        if bits not in (8, 16):
            raise ValidationError(f"PNG bit depth must be 8 or 16, got {bits}")
        maxcode = (1 << bits) - 1
        codes = np.round(np.clip(img, 0.0, data_range) / data_range * maxcode)
        if bits == 8:
            PILImage.fromarray(codes.astype(np.uint8)).save(path)
        else:
            PILImage.fromarray(codes.astype(np.uint16)).save(path)
    else:
        raise FormatError(f"unsupported image extension {ext!r} (use .f32 or .png)")


def read_sidecar(path: str) -> dict:
    """Load and validate the JSON sidecar of a raw .f32 image."""
    try:
        with open(path + ".json") as fh:
            header = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"missing or malformed sidecar for {path}: {exc}") from exc
    for key in ("height", "width", "dtype"):
        if key not in header:
            raise FormatError(f"sidecar for {path} missing field {key!r}")
    if header["dtype"] != "float32":
        raise FormatError(f"unsupported dtype {header['dtype']!r} in sidecar for {path}")
    h, w = int(header["height"]), int(header["width"])
    if h < 1 or w < 1 or h * w > 2**31:
        raise FormatError(f"bad dimensions {h}x{w} in sidecar for {path}")
    return header


def load_image(path: str) -> np.ndarray:
    """Read an image written by :func:`save_image` back as float32 in [0, 1] scale."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".f32":
        header = read_sidecar(path)
        h, w = int(header["height"]), int(header["width"])
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) != h * w * 4:
            raise FormatError(f"{path}: expected {h * w * 4} bytes for {h}x{w}, found {len(raw)}")
        return np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(DTYPE)
    if ext == ".png":
        try:
            with PILImage.open(path) as im:
                arr = np.array(im)
        except OSError as exc:
            raise FormatError(f"cannot read PNG {path}: {exc}") from exc
        if arr.ndim != 2:
            raise FormatError(f"{path}: expected single-channel grayscale, got shape {arr.shape}")
        if arr.dtype == np.uint8:
            return (arr.astype(DTYPE) / 255.0).astype(DTYPE)
        if arr.dtype in (np.uint16, np.int32):
            return (arr.astype(DTYPE) / 65535.0).astype(DTYPE)
        raise FormatError(f"{path}: unsupported PNG pixel type {arr.dtype}")
    raise FormatError(f"unsupported image extension {ext!r} (use .f32 or .png)")
