"""Mixed Poisson-Gaussian corruption and SNR.

The model is ``y = a * Poisson(x / a) + Normal(0, b^2)`` with signal-dependent
level ``a`` and signal-independent readout level ``b``, so ``E[y] = x`` and
``Var[y] = a*x + b^2``. The Poisson component is sampled exactly (NumPy's
inversion/rejection sampler), never by a Gaussian surrogate: at low dose the
rates ``x/a`` are small and the surrogate is visibly wrong there. Outputs are
intentionally not clipped to [0, 1]; clipping would bias the noise mean and
break the zero-mean assumption the self-supervised loss relies on.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeIntensityError, ShapeMismatchError, ValidationError
from .imagecore import DTYPE, as_image
from .rng import make_rng

__all__ = ["NoiseParams", "corrupt", "theoretical_moments", "snr_db"]


@dataclass(frozen=True)
class NoiseParams:
    """Poisson-Gaussian pair: ``a`` scales shot noise, ``b`` is read-noise std."""

    a: float
    b: float

    def validate(self, for_corruption: bool = False) -> None:
        if self.a < 0 or self.b < 0:
            raise ValidationError(f"noise levels must be nonnegative, got a={self.a}, b={self.b}")
        if for_corruption and self.a == 0 and self.b == 0:
            raise ValidationError("a and b cannot both be zero for corruption")


def corrupt(img: np.ndarray, params: NoiseParams, seed: int) -> np.ndarray:
    """Draw one Poisson-Gaussian corruption of ``img``; deterministic per seed."""
    img = as_image(img)
    params.validate(for_corruption=True)
    rng = make_rng(seed)
    if params.a > 0:
        if np.any(img < 0):
            raise NegativeIntensityError(
                "negative intensities are not a valid shot-noise rate (a > 0 requires x >= 0)"
            )
        noisy = params.a * rng.poisson(img.astype(np.float64) / params.a)
    else:
        noisy = img.astype(np.float64)
    if params.b > 0:
        noisy = noisy + rng.normal(0.0, params.b, size=img.shape)
    return noisy.astype(DTYPE)


def theoretical_moments(x: float, params: NoiseParams) -> tuple[float, float]:
    """Exact mean and variance of one corrupted pixel of clean value ``x``."""
    params.validate()
    if params.a > 0 and x < 0:
        raise NegativeIntensityError(f"x = {x} < 0 is not a valid shot-noise rate")
    return float(x), float(params.a * x + params.b * params.b)


def snr_db(clean: np.ndarray, noisy: np.ndarray) -> float:
    """Signal-to-noise ratio 10*log10(mean(s^2)/mean(n^2)) in dB."""
    clean = as_image(clean)
    noisy = as_image(noisy)
    if clean.shape != noisy.shape:
        raise ShapeMismatchError(f"shape mismatch: {clean.shape} vs {noisy.shape}")
    noise = noisy.astype(np.float64) - clean.astype(np.float64)
    noise_power = float(np.mean(noise * noise))
    signal_power = float(np.mean(clean.astype(np.float64) ** 2))
    if noise_power == 0.0:
        return math.inf
    return 10.0 * math.log10(signal_power / noise_power)
