"""Random and fixed-location sub-sampling of a noisy image.

A sub-sampling with stride ``s`` keeps one pixel per ``s x s`` block: the
kept pixels form the low-resolution image ``sub`` of shape (H/s, W/s), and
the full-resolution binary mask marks the remaining pixels with 1 (so the
mask selects exactly the pixels the training loss is evaluated on). The
per-block channel choice is stored explicitly in ``selection`` so the result
can be audited in O(1) per block instead of being re-derived from the mask.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeMismatchError, ValidationError
from .imagecore import DTYPE, as_image, pixel_unshuffle
from .rng import derive_seed, make_rng

__all__ = ["SamplerConfig", "SubsampleResult", "subsample", "apply_mask", "resample_set"]

STRATEGIES = ("random", "fixed")


@dataclass(frozen=True)
class SamplerConfig:
    stride: int = 2
    strategy: str = "random"
    fixed_offset: int = 0
    seed: int = 0

    def validate(self) -> None:
        if self.stride < 2:
            raise ValidationError(f"stride must be >= 2, got {self.stride}")
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0 <= self.fixed_offset < self.stride * self.stride:
            raise ValidationError(
                f"fixed_offset {self.fixed_offset} outside [0, {self.stride * self.stride})"
            )


@dataclass(frozen=True)
class SubsampleResult:
    """Sub-sampled image, unsampled-pixel mask, and the per-block choices."""

    sub: np.ndarray        # (H/s, W/s) float32
    mask: np.ndarray       # (H, W) float32, 0 = sampled, 1 = unsampled
    selection: np.ndarray  # (H/s, W/s) int64 in [0, s*s)

    @property
    def stride(self) -> int:
        return self.mask.shape[0] // self.sub.shape[0]


def subsample(img: np.ndarray, cfg: SamplerConfig) -> SubsampleResult:
    """Pick one pixel per block (uniformly at random, or at a fixed offset)."""
    cfg.validate()
    img = as_image(img)
    s = cfg.stride
    stack = pixel_unshuffle(img, s)
    h, w, _ = stack.shape
    if cfg.strategy == "random":
        selection = make_rng(cfg.seed).integers(0, s * s, size=(h, w), dtype=np.int64)
    else:
        selection = np.full((h, w), cfg.fixed_offset, dtype=np.int64)
    sub = np.take_along_axis(stack, selection[:, :, None], axis=2)[:, :, 0]
    mask = np.ones(img.shape, dtype=DTYPE)
    rows = np.arange(h)[:, None] * s + selection // s
    cols = np.arange(w)[None, :] * s + selection % s
    mask[rows.ravel(), cols.ravel()] = 0.0
    return SubsampleResult(sub=np.ascontiguousarray(sub), mask=mask, selection=selection)


def apply_mask(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Hadamard product of image and binary mask."""
    img = as_image(img)
    mask = as_image(mask)
    if img.shape != mask.shape:
        raise ShapeMismatchError(f"shape mismatch: {img.shape} vs {mask.shape}")
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise ValidationError("mask must be binary (all values 0 or 1)")
    return img * mask


def resample_set(img: np.ndarray, cfg: SamplerConfig, m: int) -> list[SubsampleResult]:
    """M independent sub-samplings with child seeds derived from ``cfg.seed``."""
    if m < 1:
        raise ValidationError(f"number of draws must be >= 1, got {m}")
    return [subsample(img, replace(cfg, seed=derive_seed(cfg.seed, i))) for i in range(m)]
