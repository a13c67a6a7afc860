"""Image container conventions and block-rearrangement primitives.

An image is a 2-D ``float32`` array of shape ``(height, width)``; a channel
stack is a 3-D array of shape ``(height, width, channels)``. Within each
``s x s`` block, channels are ordered row-major: channel ``k`` holds the
pixel at block offset ``(k // s, k % s)``. Fixing this order makes the
rearrangements bit-exact inverses of each other and keeps golden tests
stable.
"""

import numpy as np

from .errors import DivisibilityError, OutOfBoundsError, ShapeMismatchError, ValidationError

__all__ = [
    "as_image",
    "pixel_unshuffle",
    "pixel_shuffle",
    "crop_patch",
    "center_crop_to_multiple",
]

DTYPE = np.float32


def as_image(data) -> np.ndarray:
    """Validate and return ``data`` as a float32 (H, W) image array."""
    img = np.ascontiguousarray(data, dtype=DTYPE)
    if img.ndim != 2:
        raise ValidationError(f"image must be 2-D, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValidationError(f"image dims must be positive, got {img.shape}")
    if not np.isfinite(img).all():
        raise ValidationError("image contains non-finite values")
    return img


def _check_divisible(h: int, w: int, s: int) -> None:
    if s < 2:
        raise ValidationError(f"stride must be >= 2, got {s}")
    if h % s != 0:
        raise DivisibilityError(f"height {h} not divisible by stride {s}")
    if w % s != 0:
        raise DivisibilityError(f"width {w} not divisible by stride {s}")


def pixel_unshuffle(img: np.ndarray, s: int) -> np.ndarray:
    """Rearrange (H, W) into (H/s, W/s, s*s) blocks, channels row-major.

    Channel ``k`` at position ``(i, j)`` equals ``img[i*s + k//s, j*s + k%s]``.
    """
    img = as_image(img)
    h, w = img.shape
    _check_divisible(h, w, s)
    stack = img.reshape(h // s, s, w // s, s).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(stack.reshape(h // s, w // s, s * s))


def pixel_shuffle(stack: np.ndarray, s: int) -> np.ndarray:
    """Inverse of :func:`pixel_unshuffle`; bit-exact round trip."""
    stack = np.ascontiguousarray(stack, dtype=DTYPE)
    if stack.ndim != 3:
        raise ValidationError(f"stack must be 3-D, got shape {stack.shape}")
    if s < 2:
        raise ValidationError(f"stride must be >= 2, got {s}")
    h, w, c = stack.shape
    if c != s * s:
        raise ShapeMismatchError(f"stack has {c} channels, expected s*s = {s * s}")
    img = stack.reshape(h, w, s, s).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(img.reshape(h * s, w * s))


def crop_patch(img: np.ndarray, top: int, left: int, size: int, stride: int | None = None) -> np.ndarray:
    """Copy the ``size x size`` window with corner (top, left) out of ``img``."""
    img = as_image(img)
    h, w = img.shape
    if size < 1:
        raise ValidationError(f"patch size must be positive, got {size}")
    if stride is not None and size % stride != 0:
        raise DivisibilityError(f"patch size {size} not divisible by stride {stride}")
    if top < 0 or left < 0 or top + size > h or left + size > w:
        raise OutOfBoundsError(
            f"patch [{top}:{top + size}, {left}:{left + size}] outside image of size {h}x{w}"
        )
    return img[top : top + size, left : left + size].copy()


def center_crop_to_multiple(img: np.ndarray, multiple: int) -> np.ndarray:
    """Center-crop to the largest size whose dims are divisible by ``multiple``.

    Used before sub-sampling so ragged borders are dropped instead of padded
    (padding would fake pixel statistics at the edge).
    """
    img = as_image(img)
    h, w = img.shape
    if multiple < 1:
        raise ValidationError(f"multiple must be positive, got {multiple}")
    nh = (h // multiple) * multiple
    nw = (w // multiple) * multiple
    if nh < multiple or nw < multiple:
        raise ValidationError(f"image {h}x{w} smaller than one {multiple}x{multiple} block")
    top = (h - nh) // 2
    left = (w - nw) // 2
    return img[top : top + nh, left : left + nw].copy()
