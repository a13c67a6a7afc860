"""Super-resolving denoiser network: encoder-decoder with explicit backward.

The network maps a sub-sampled image of shape (H/s, W/s) to a full-resolution
(H, W) estimate. The encoder is a U-Net-style down/up path with skip
connections ending in a ``feature_channels``-wide feature map at input
resolution; the decoder is one x-s upsampling stage (pixel shuffle,
transposed convolution, or bilinear interpolation) followed by three 1x1
convolutions. Leaky-rectifier activations (slope 0.1) throughout, linear
output layer.

Because the network only ever sees the sub-sampled pixels, its output at any
full-resolution position cannot depend on the value the loss compares it to;
that structural property is what makes the self-supervised loss unbiased.

Internally activations are NHWC (channels innermost) and conv weights are
(kh, kw, C, K); forward and backward run on the :mod:`zsdn._kernels` conv
pair plus the cheap rearrangement ops defined here. Backward returns exact
reverse-mode gradients for every weight (checked against central finite
differences in the test suite).
"""

import io
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .errors import DivisibilityError, FormatError, ShapeMismatchError, ValidationError
from .rng import make_rng

__all__ = [
    "NetConfig",
    "Model",
    "init_model",
    "forward",
    "backward",
    "forward_batch",
    "backward_batch",
    "parameter_count",
    "save_model",
    "load_model",
]

LEAKY_SLOPE = 0.1
UPSAMPLINGS = ("pixel_shuffle", "transposed_conv", "bilinear")
CHECKPOINT_MAGIC = b"ZSDN1"


@dataclass(frozen=True)
class NetConfig:
    stride: int = 2
    base_channels: int = 32
    depth: int = 3
    feature_channels: int = 128
    upsampling: str = "pixel_shuffle"

    def validate(self) -> None:
        if self.stride < 2:
            raise ValidationError(f"stride must be >= 2, got {self.stride}")
        if self.base_channels < 1 or self.depth < 1 or self.feature_channels < 1:
            raise ValidationError("base_channels, depth and feature_channels must be positive")
        if self.upsampling not in UPSAMPLINGS:
            raise ValidationError(f"upsampling must be one of {UPSAMPLINGS}, got {self.upsampling!r}")
        s2 = self.stride * self.stride
        if self.upsampling == "pixel_shuffle" and self.feature_channels % s2 != 0:
            raise ValidationError(
                f"feature_channels {self.feature_channels} not divisible by stride^2 = {s2} "
                "(required for pixel-shuffle upsampling)"
            )

    @property
    def upsampled_channels(self) -> int:
        """Channel width entering the 1x1 head after the x-s upsampling."""
        if self.upsampling == "pixel_shuffle":
            return self.feature_channels // (self.stride * self.stride)
        if self.upsampling == "transposed_conv":
            return self.base_channels
        return self.feature_channels


@dataclass
class Model:
    config: NetConfig
    weights: dict  # name -> np.ndarray, stable insertion order

    @property
    def dtype(self):
        return next(iter(self.weights.values())).dtype

    def astype(self, dtype) -> "Model":
        return Model(self.config, {k: v.astype(dtype) for k, v in self.weights.items()})

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.weights.items()})


def _layer_shapes(cfg: NetConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) pairs for every parameter array."""
    base, feat, s = cfg.base_channels, cfg.feature_channels, cfg.stride
    shapes = [("enc_in.w", (3, 3, 1, base)), ("enc_in.b", (base,))]
    for k in range(1, cfg.depth + 1):
        shapes += [(f"enc{k}.w", (3, 3, base, base)), (f"enc{k}.b", (base,))]
    shapes += [("mid.w", (3, 3, base, base)), ("mid.b", (base,))]
    for k in range(cfg.depth, 0, -1):
        shapes += [(f"dec{k}.w", (3, 3, 2 * base, base)), (f"dec{k}.b", (base,))]
    shapes += [("feat.w", (3, 3, base, feat)), ("feat.b", (feat,))]
    if cfg.upsampling == "transposed_conv":
        shapes += [("up.w", (feat, base, s, s)), ("up.b", (base,))]
    up_ch = cfg.upsampled_channels
    h1, h2 = 2 * base, base
    shapes += [
        ("head1.w", (1, 1, up_ch, h1)), ("head1.b", (h1,)),
        ("head2.w", (1, 1, h1, h2)), ("head2.b", (h2,)),
        ("head3.w", (1, 1, h2, 1)), ("head3.b", (1,)),
    ]
    return shapes


def parameter_count(cfg: NetConfig) -> int:
    cfg.validate()
    return sum(int(np.prod(shape)) for _, shape in _layer_shapes(cfg))


def init_model(cfg: NetConfig, seed: int) -> Model:
    """Fan-in-scaled uniform init: w ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0."""
    cfg.validate()
    rng = make_rng(seed)
    weights = {}
    for name, shape in _layer_shapes(cfg):
        if name.endswith(".b"):
            weights[name] = np.zeros(shape, dtype=np.float32)
            continue
        if name == "up.w":
            fan_in = shape[0]  # transposed conv: each output pixel sums over in-channels only
        else:
            fan_in = int(np.prod(shape[:3]))  # kh * kw * C
        limit = 1.0 / np.sqrt(fan_in)
        weights[name] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
    return Model(cfg, weights)


# ---------------------------------------------------------------------------
# cheap tensor ops (NHWC)
# ---------------------------------------------------------------------------

def _lrelu(x):
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def _lrelu_bwd(x, g):
    return np.where(x > 0, g, LEAKY_SLOPE * g)


def _maxpool2(x):
    n, h, w, c = x.shape
    win = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 2, 4, 5)
    flat = win.reshape(n, h // 2, w // 2, 4, c)
    idx = flat.argmax(axis=3)  # first max wins ties, deterministically
    out = np.take_along_axis(flat, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return np.ascontiguousarray(out), idx


def _maxpool2_bwd(g, idx, in_shape):
    n, h, w, c = in_shape
    flat = np.zeros((n, h // 2, w // 2, 4, c), dtype=g.dtype)
    np.put_along_axis(flat, idx[:, :, :, None, :], g[:, :, :, None, :], axis=3)
    win = flat.reshape(n, h // 2, w // 2, 2, 2, c).transpose(0, 1, 3, 2, 4, 5)
    return win.reshape(n, h, w, c)


def _upsample2(x):
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def _upsample2_bwd(g):
    n, h, w, c = g.shape
    return g.reshape(n, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))


def _shuffle(x, s):
    """(N, h, w, C*s^2) -> (N, h*s, w*s, C); channel c*s^2 + u*s + v -> offset (u, v)."""
    n, h, w, cs2 = x.shape
    c = cs2 // (s * s)
    y = x.reshape(n, h, w, c, s, s).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(y.reshape(n, h * s, w * s, c))


def _unshuffle(x, s):
    n, hs, ws, c = x.shape
    h, w = hs // s, ws // s
    y = x.reshape(n, h, s, w, s, c).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(y.reshape(n, h, w, c * s * s))


def _interp_matrix(n_in: int, s: int, dtype) -> np.ndarray:
    """Bilinear x-s upsampling as an (n_in*s, n_in) matrix, half-pixel centers."""
    n_out = n_in * s
    src = (np.arange(n_out, dtype=np.float64) + 0.5) / s - 0.5
    i0 = np.floor(src).astype(int)
    frac = src - i0
    i1 = np.clip(i0 + 1, 0, n_in - 1)
    i0 = np.clip(i0, 0, n_in - 1)
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(mat, (rows, i0), 1.0 - frac)
    np.add.at(mat, (rows, i1), frac)
    return mat.astype(dtype)


def _bilinear_up(x, s):
    n, h, w, c = x.shape
    r = _interp_matrix(h, s, x.dtype)
    cm = _interp_matrix(w, s, x.dtype)
    tmp = np.moveaxis(np.tensordot(r, x, axes=([1], [1])), 0, 1)    # (N, h*s, w, C)
    y = np.moveaxis(np.tensordot(cm, tmp, axes=([1], [2])), 0, 2)   # (N, h*s, w*s, C)
    return np.ascontiguousarray(y)


def _bilinear_up_bwd(g, s, in_h, in_w):
    r = _interp_matrix(in_h, s, g.dtype)
    cm = _interp_matrix(in_w, s, g.dtype)
    tmp = np.moveaxis(np.tensordot(cm.T, g, axes=([1], [2])), 0, 2)  # (N, h*s, w, C)
    gx = np.moveaxis(np.tensordot(r.T, tmp, axes=([1], [1])), 0, 1)  # (N, h, w, C)
    return np.ascontiguousarray(gx)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def _check_input(cfg: NetConfig, x: np.ndarray) -> None:
    div = 1 << cfg.depth
    if x.shape[1] % div != 0 or x.shape[2] % div != 0:
        raise DivisibilityError(
            f"network input {x.shape[1]}x{x.shape[2]} must be divisible by 2^depth = {div}"
        )


def forward_batch(model: Model, x: np.ndarray, keep_cache: bool = False):
    """Run the network on (N, h, w); returns (y, cache) with y (N, h*s, w*s)."""
    cfg = model.config
    if x.ndim != 3:
        raise ValidationError(f"expected input of shape (N, h, w), got {x.shape}")
    _check_input(cfg, x[:, :, :, None])
    p = model.weights
    s = cfg.stride
    x = np.ascontiguousarray(x, dtype=model.dtype)[:, :, :, None]
    cache = {} if keep_cache else None

    def conv(name, t):
        if keep_cache:
            out, ctx = _kernels.conv2d_fwd(t, p[name + ".w"], p[name + ".b"])
            cache[name + ".ctx"] = ctx
            cache[name + ".pre"] = out
        else:
            out = _kernels.conv2d(t, p[name + ".w"], p[name + ".b"])
        return out

    cur = _lrelu(conv("enc_in", x))
    skips = []
    pools = []
    for k in range(1, cfg.depth + 1):
        e = _lrelu(conv(f"enc{k}", cur))
        skips.append(e)
        cur, idx = _maxpool2(e)
        pools.append((idx, e.shape))
    cur = _lrelu(conv("mid", cur))
    for k in range(cfg.depth, 0, -1):
        up = _upsample2(cur)
        cur = np.concatenate([up, skips[k - 1]], axis=3)
        cur = _lrelu(conv(f"dec{k}", cur))
    v = _lrelu(conv("feat", cur))

    if cfg.upsampling == "pixel_shuffle":
        u = _shuffle(v, s)
    elif cfg.upsampling == "transposed_conv":
        n, h, w, feat = v.shape
        m = p["up.w"].reshape(feat, -1)  # columns ordered (k, u, v)
        t = (v.reshape(-1, feat) @ m).reshape(n, h, w, -1)
        u = _shuffle(t, s) + p["up.b"]
        if keep_cache:
            cache["up.in"] = v
    else:
        u = _bilinear_up(v, s)
        if keep_cache:
            cache["up.in_shape"] = v.shape
    y = _lrelu(conv("head1", u))
    y = _lrelu(conv("head2", y))
    y = conv("head3", y)

    if keep_cache:
        cache["pools"] = pools
    return np.ascontiguousarray(y[:, :, :, 0]), cache


def backward_batch(model: Model, cache: dict, grad_out: np.ndarray) -> dict:
    """Exact reverse-mode gradients of forward_batch w.r.t. every weight."""
    cfg = model.config
    p = model.weights
    s = cfg.stride
    grads = {}

    def conv_bwd(name, g, through_lrelu=True):
        if through_lrelu:
            g = _lrelu_bwd(cache[name + ".pre"], g)
        gx, gw, gb = _kernels.conv2d_bwd(cache[name + ".ctx"], p[name + ".w"], g)
        grads[name + ".w"] = gw
        grads[name + ".b"] = gb
        return gx

    g = conv_bwd("head3", grad_out[:, :, :, None], through_lrelu=False)
    g = conv_bwd("head2", g)
    g = conv_bwd("head1", g)

    if cfg.upsampling == "pixel_shuffle":
        g = _unshuffle(g, s)
    elif cfg.upsampling == "transposed_conv":
        grads["up.b"] = g.sum(axis=(0, 1, 2))
        gt = _unshuffle(g, s)
        v = cache["up.in"]
        n, h, w, feat = v.shape
        gtf = gt.reshape(-1, gt.shape[3])
        vf = v.reshape(-1, feat)
        grads["up.w"] = (vf.T @ gtf).reshape(p["up.w"].shape)
        m = p["up.w"].reshape(feat, -1)
        g = (gtf @ m.T).reshape(n, h, w, feat)
    else:
        _, h, w, _ = cache["up.in_shape"]
        g = _bilinear_up_bwd(g, s, h, w)

    g = conv_bwd("feat", g)
    pools = cache["pools"]
    base = cfg.base_channels
    skip_grads = {}
    for k in range(1, cfg.depth + 1):
        g = conv_bwd(f"dec{k}", g)
        g_up, g_skip = g[:, :, :, :base], g[:, :, :, base:]
        g = _upsample2_bwd(g_up)
        skip_grads[k] = g_skip  # joins the encoder path above the level-k pooling
    g = conv_bwd("mid", g)
    for k in range(cfg.depth, 0, -1):
        idx, shape = pools[k - 1]
        g = _maxpool2_bwd(g, idx, shape)
        g = g + skip_grads[k]
        g = conv_bwd(f"enc{k}", g)
    conv_bwd("enc_in", g)
    return grads


def forward(model: Model, sub: np.ndarray) -> np.ndarray:
    """Denoise one sub-sampled image (h, w) -> (h*s, w*s)."""
    sub = np.asarray(sub)
    if sub.ndim != 2:
        raise ValidationError(f"expected a 2-D sub-sampled image, got shape {sub.shape}")
    y, _ = forward_batch(model, sub[None].astype(model.dtype))
    out = y[0]
    if not np.isfinite(out).all():
        raise ValidationError("network produced non-finite output")
    return out


def backward(model: Model, sub: np.ndarray, grad_out: np.ndarray) -> dict:
    """Weight gradients for a single input; recomputes the forward pass."""
    sub = np.asarray(sub)
    grad_out = np.asarray(grad_out)
    expect = (sub.shape[0] * model.config.stride, sub.shape[1] * model.config.stride)
    if grad_out.shape != expect:
        raise ShapeMismatchError(f"grad_out shape {grad_out.shape} != forward output {expect}")
    _, cache = forward_batch(model, sub[None].astype(model.dtype), keep_cache=True)
    return backward_batch(model, cache, grad_out[None].astype(model.dtype))


# ---------------------------------------------------------------------------
# checkpoint container: magic + uint32 header length + JSON header + raw data
# ---------------------------------------------------------------------------

def save_model(model: Model, path: str) -> None:
    header = {
        "config": asdict(model.config),
        "params": [
            {"name": k, "shape": list(v.shape), "dtype": str(v.dtype)}
            for k, v in model.weights.items()
        ],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for v in model.weights.values():
            fh.write(np.ascontiguousarray(v).astype("<" + v.dtype.str[1:]).tobytes())


def load_model(path: str) -> Model:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc}") from exc
    buf = io.BytesIO(data)
    if buf.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise FormatError(f"{path} is not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<I", buf.read(4))
    try:
        header = json.loads(buf.read(hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed checkpoint header") from exc
    cfg = NetConfig(**header["config"])
    cfg.validate()
    weights = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        dtype = np.dtype(entry["dtype"])
        nbytes = int(np.prod(shape)) * dtype.itemsize
        raw = buf.read(nbytes)
        if len(raw) != nbytes:
            raise FormatError(f"{path}: truncated parameter {entry['name']}")
        weights[entry["name"]] = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).reshape(shape).astype(dtype)
    expected = [(name, shape) for name, shape in _layer_shapes(cfg)]
    actual = [(k, tuple(v.shape)) for k, v in weights.items()]
    if actual != expected:
        raise FormatError(f"{path}: parameter manifest does not match config")
    return Model(cfg, weights)
