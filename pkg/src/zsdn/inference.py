"""Ensemble restoration: average the network output over M random sub-samplings.

A single sub-sampling discards most pixels, so one pass is a noisy draw from
the space of plausible restorations; averaging M independent draws
approximates the posterior-mean estimate and tightens it as M grows. Draw
seeds derive deterministically from the sampler seed, and accumulation runs
in float64 in a fixed order so the result is independent of scheduling.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import network
from .errors import ValidationError
from .imagecore import DTYPE, as_image, center_crop_to_multiple
from .rng import derive_seed
from .subsampler import SamplerConfig, subsample

__all__ = ["MMSEConfig", "denoise_once", "denoise_mmse"]


@dataclass(frozen=True)
class MMSEConfig:
    m: int = 50
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    tile: int | None = None       # process large images in tiles of this size
    tile_halo: int = 32           # overlap (in sub-image pixels) discarded at tile seams

    def validate(self) -> None:
        self.sampler.validate()
        if self.m < 1:
            raise ValidationError(f"ensemble size must be >= 1, got {self.m}")
        if self.tile is not None and self.tile < 1:
            raise ValidationError(f"tile size must be positive, got {self.tile}")
        if self.tile_halo < 0:
            raise ValidationError(f"tile halo must be nonnegative, got {self.tile_halo}")


def _prepare(model: network.Model, noisy: np.ndarray) -> np.ndarray:
    """Center-crop so dims divide both the stride and the encoder pooling."""
    block = model.config.stride * (1 << model.config.depth)
    return center_crop_to_multiple(as_image(noisy), block)


def _forward_tiled(model: network.Model, sub: np.ndarray, tile: int, halo: int) -> np.ndarray:
    """Run the network tile-by-tile on the sub-sampled image.

    Tiles overlap by ``halo`` sub-pixels on each interior edge and the halo
    region is discarded after the pass. Border effects differ slightly from a
    single full pass once the receptive field exceeds the halo; the halo
    default keeps that below noise level at desk scale.
    """
    s = model.config.stride
    div = 1 << model.config.depth
    h, w = sub.shape
    out = np.empty((h * s, w * s), dtype=DTYPE)
    step = max(tile, div)
    for top in range(0, h, step):
        for left in range(0, w, step):
            t0 = max(0, top - halo)
            l0 = max(0, left - halo)
            t1 = min(h, top + step + halo)
            l1 = min(w, left + step + halo)
            # expand to the pooling granularity
            t0 -= t0 % div
            l0 -= l0 % div
            t1 = min(h, t1 + (-t1) % div)
            l1 = min(w, l1 + (-l1) % div)
            piece = network.forward(model, sub[t0:t1, l0:l1])
            rt = top - t0
            rl = left - l0
            rb = min(top + step, h) - t0
            rr = min(left + step, w) - l0
            out[top * s : (top + (rb - rt)) * s, left * s : (left + (rr - rl)) * s] = piece[
                rt * s : rb * s, rl * s : rr * s
            ]
    return out


def denoise_once(model: network.Model, noisy: np.ndarray, cfg: SamplerConfig,
                 tile: int | None = None, tile_halo: int = 32) -> np.ndarray:
    """One restoration from a single sub-sampling of ``noisy``."""
    cfg.validate()
    if cfg.stride != model.config.stride:
        raise ValidationError(
            f"sampler stride {cfg.stride} != model stride {model.config.stride}"
        )
    prepared = _prepare(model, noisy)
    res = subsample(prepared, cfg)
    if tile is None:
        return network.forward(model, res.sub)
    return _forward_tiled(model, res.sub, tile, tile_halo)


def denoise_mmse(model: network.Model, noisy: np.ndarray, cfg: MMSEConfig) -> np.ndarray:
    """Mean of ``cfg.m`` independent single-draw restorations."""
    cfg.validate()
    prepared = _prepare(model, noisy)
    acc = None
    for i in range(cfg.m):
        draw_cfg = replace(cfg.sampler, seed=derive_seed(cfg.sampler.seed, i))
        out = denoise_once(model, prepared, draw_cfg, cfg.tile, cfg.tile_halo)
        acc = out.astype(np.float64) if acc is None else acc + out.astype(np.float64)
    return (acc / cfg.m).astype(DTYPE)
