"""Zero-shot training loop and the self-supervised loss.

Each step draws a batch of random crops from the single noisy image,
sub-samples every crop with fresh randomness (the re-drawing acts as data
augmentation against overfitting), runs the network on the sub-sampled
crops, and minimizes the mean squared error on the *unsampled* pixels only.
Adam does the updates. Everything is reproducible from one seed.

``loss_decomposition_check`` empirically verifies the identity that makes
the loss meaningful: for any fixed denoiser and zero-mean pixel-independent
noise, the expected masked loss against noisy targets equals the expected
masked loss against the clean image plus the mean noise variance.
"""

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics, network
from .errors import DivergenceError, EmptyMaskError, ShapeMismatchError, ValidationError
from .imagecore import as_image, center_crop_to_multiple, crop_patch
from .noisemodel import NoiseParams, corrupt
from .rng import derive_seed, make_rng
from .subsampler import SamplerConfig, subsample

__all__ = [
    "TrainConfig",
    "TrainLog",
    "masked_loss",
    "train_zero_shot",
    "loss_decomposition_check",
    "AdamState",
]

LOSS_ABORT_THRESHOLD = 1e6


@dataclass(frozen=True)
class TrainConfig:
    patch_size: int = 128
    batch_size: int = 12
    epochs: int = 300
    iters_per_epoch: int = 1
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    seed: int = 0

    def validate(self, net_cfg: network.NetConfig) -> None:
        self.sampler.validate()
        net_cfg.validate()
        if self.sampler.stride != net_cfg.stride:
            raise ValidationError(
                f"sampler stride {self.sampler.stride} != network stride {net_cfg.stride}"
            )
        if self.patch_size < 1 or self.batch_size < 1 or self.epochs < 0 or self.iters_per_epoch < 1:
            raise ValidationError("patch_size, batch_size, iters_per_epoch must be positive; epochs >= 0")
        if self.lr <= 0:
            raise ValidationError(f"learning rate must be positive, got {self.lr}")
        block = self.sampler.stride * (1 << net_cfg.depth)
        if self.patch_size % block != 0:
            raise ValidationError(
                f"patch_size {self.patch_size} must be divisible by stride * 2^depth = {block}"
            )


@dataclass
class TrainLog:
    """One entry per completed epoch."""

    losses: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    psnrs: list = field(default_factory=list)  # empty unless ground truth was supplied

    def append(self, loss: float, seconds: float, psnr: float | None = None) -> None:
        self.losses.append(float(loss))
        self.seconds.append(float(seconds))
        if psnr is not None:
            self.psnrs.append(float(psnr))

    def to_jsonl(self) -> str:
        lines = []
        for i, (loss, sec) in enumerate(zip(self.losses, self.seconds)):
            row = {"epoch": i + 1, "loss": loss, "seconds": sec}
            if i < len(self.psnrs):
                row["psnr"] = self.psnrs[i]
            lines.append(json.dumps(row))
        return "\n".join(lines) + ("\n" if lines else "")


def masked_loss(pred: np.ndarray, noisy: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared difference over mask-1 pixels only."""
    pred = np.asarray(pred)
    noisy = np.asarray(noisy)
    mask = np.asarray(mask)
    if pred.shape != noisy.shape or pred.shape != mask.shape:
        raise ShapeMismatchError(
            f"shape mismatch: pred {pred.shape}, noisy {noisy.shape}, mask {mask.shape}"
        )
    if not np.all((mask == 0) | (mask == 1)):
        raise ValidationError("mask must be binary")
    count = float(mask.sum())
    if count == 0:
        raise EmptyMaskError("mask selects no pixels; masked loss undefined")
    diff = (pred.astype(np.float64) - noisy.astype(np.float64)) * mask.astype(np.float64)
    return float((diff * diff).sum() / count)


class AdamState:
    """Adam with bias correction; dtype follows the parameter arrays."""

    def __init__(self, weights: dict, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in weights.items()}
        self.v = {k: np.zeros_like(v) for k, v in weights.items()}

    def step(self, weights: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, w in weights.items():
            g = grads[name].astype(w.dtype)
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            w -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _training_psnr(model, noisy, clean, seed, data_range=1.0):
    """PSNR of a single fixed-seed denoising pass, for the per-epoch log."""
    block = model.config.stride * (1 << model.config.depth)
    noisy_c = center_crop_to_multiple(noisy, block)
    clean_c = center_crop_to_multiple(clean, block)
    res = subsample(noisy_c, SamplerConfig(stride=model.config.stride, seed=seed))
    out = network.forward(model, res.sub)
    return metrics.psnr(clean_c, out, data_range)


def train_zero_shot(noisy: np.ndarray, net_cfg: network.NetConfig, cfg: TrainConfig,
                    clean: np.ndarray | None = None):
    """Train a denoiser on a single noisy image; returns (model, log).

    Deterministic: the model init, crop positions and per-crop sub-sampling
    seeds all derive from ``cfg.seed``. When ``clean`` is given, a PSNR entry
    is logged each epoch (a single fixed sub-sampling pass, not the full
    ensemble).
    """
    noisy = as_image(noisy)
    cfg.validate(net_cfg)
    h, w = noisy.shape
    if h < cfg.patch_size or w < cfg.patch_size:
        raise ValidationError(f"image {h}x{w} smaller than patch_size {cfg.patch_size}")

    model = network.init_model(net_cfg, derive_seed(cfg.seed, 0))
    rng = make_rng(derive_seed(cfg.seed, 1))
    psnr_seed = derive_seed(cfg.seed, 2)
    adam = AdamState(model.weights, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    log = TrainLog()

    s = cfg.sampler.stride
    p = cfg.patch_size
    sub_p = p // s
    n_masked = p * p - sub_p * sub_p  # one sampled pixel per s x s block

    for _ in range(cfg.epochs):
        t0 = time.perf_counter()
        epoch_loss = 0.0
        for _ in range(cfg.iters_per_epoch):
            tops = rng.integers(0, h - p + 1, size=cfg.batch_size)
            lefts = rng.integers(0, w - p + 1, size=cfg.batch_size)
            draw_seeds = rng.integers(0, np.iinfo(np.int64).max, size=cfg.batch_size)

            subs = np.empty((cfg.batch_size, sub_p, sub_p), dtype=np.float32)
            masks = np.empty((cfg.batch_size, p, p), dtype=np.float32)
            targets = np.empty((cfg.batch_size, p, p), dtype=np.float32)
            for i in range(cfg.batch_size):
                patch = crop_patch(noisy, int(tops[i]), int(lefts[i]), p)
                res = subsample(patch, replace(cfg.sampler, seed=int(draw_seeds[i])))
                subs[i] = res.sub
                masks[i] = res.mask
                targets[i] = patch

            pred, cache = network.forward_batch(model, subs, keep_cache=True)
            diff = (pred - targets) * masks
            loss = float((diff * diff).sum(dtype=np.float64) / (cfg.batch_size * n_masked))
            if not math.isfinite(loss) or loss > LOSS_ABORT_THRESHOLD:
                raise DivergenceError(
                    f"training diverged at step {adam.t + 1}: loss = {loss!r}"
                )
            grad_pred = (2.0 / (cfg.batch_size * n_masked)) * diff
            grads = network.backward_batch(model, cache, grad_pred.astype(np.float32))
            adam.step(model.weights, grads)
            epoch_loss += loss
        epoch_loss /= cfg.iters_per_epoch
        elapsed = time.perf_counter() - t0
        psnr_val = None
        if clean is not None:
            psnr_val = _training_psnr(model, noisy, clean, psnr_seed)
        log.append(epoch_loss, elapsed, psnr_val)
    return model, log


def loss_decomposition_check(denoiser, clean: np.ndarray, params: NoiseParams, trials: int,
                             stride: int = 2, seed: int = 0):
    """Monte-Carlo check of the noisy-target vs clean-target loss identity.

    ``denoiser`` is either a fixed :class:`~zsdn.network.Model` or any callable
    mapping a sub-sampled image (h, w) to a full-resolution image (h*s, w*s);
    it must not depend on the noise draws it is evaluated on. Returns
    ``(lhs, rhs)`` where lhs is the mean per-pixel squared error against the
    unsampled *noisy* pixels and rhs is the same against the *clean* pixels
    plus the mean noise variance over those pixels.
    """
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    clean = as_image(clean)
    if callable(denoiser):
        fn = denoiser
    else:
        fn = lambda sub: network.forward(denoiser, sub)  # noqa: E731
    params.validate()
    clean64 = clean.astype(np.float64)
    var_map = params.a * clean64 + params.b * params.b
    noiseless = params.a == 0 and params.b == 0

    lhs_sum = 0.0
    err_sum = 0.0
    var_sum = 0.0
    for t in range(trials):
        # noiseless degenerate: both sides reduce to the clean-target loss
        y = clean if noiseless else corrupt(clean, params, derive_seed(seed, 2 * t))
        res = subsample(y, SamplerConfig(stride=stride, seed=derive_seed(seed, 2 * t + 1)))
        out = np.asarray(fn(res.sub), dtype=np.float64)
        if out.shape != clean.shape:
            raise ShapeMismatchError(
                f"denoiser returned {out.shape}, expected full resolution {clean.shape}"
            )
        m = res.mask.astype(np.float64)
        cnt = m.sum()
        d_noisy = (out - y.astype(np.float64)) * m
        d_clean = (out - clean64) * m
        lhs_sum += (d_noisy * d_noisy).sum() / cnt
        err_sum += (d_clean * d_clean).sum() / cnt
        var_sum += (var_map * m).sum() / cnt
    lhs = lhs_sum / trials
    rhs = err_sum / trials + var_sum / trials
    return lhs, rhs
