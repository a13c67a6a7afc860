"""Zero-shot self-supervised denoising for single low-SNR images.

Pipeline: sub-sample one noisy image into resolution-mismatched training
pairs, train a super-resolving denoiser on the unsampled pixels, then
restore by averaging the output over many random sub-samplings.
"""

from ._kernels import backend as kernel_backend
from .imagecore import crop_patch, pixel_shuffle, pixel_unshuffle
from .inference import MMSEConfig, denoise_mmse, denoise_once
from .metrics import EvalReport, error_map, line_profile, psnr, ssim
from .network import Model, NetConfig, backward, forward, init_model, load_model, save_model
from .noisemodel import NoiseParams, corrupt, snr_db, theoretical_moments
from .phantom import LatticeSpec, generate_lattice, load_image, save_image
from .subsampler import SamplerConfig, SubsampleResult, apply_mask, resample_set, subsample
from .trainer import TrainConfig, TrainLog, loss_decomposition_check, masked_loss, train_zero_shot

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "crop_patch", "pixel_shuffle", "pixel_unshuffle",
    "MMSEConfig", "denoise_mmse", "denoise_once",
    "EvalReport", "error_map", "line_profile", "psnr", "ssim",
    "Model", "NetConfig", "backward", "forward", "init_model", "load_model", "save_model",
    "NoiseParams", "corrupt", "snr_db", "theoretical_moments",
    "LatticeSpec", "generate_lattice", "load_image", "save_image",
    "SamplerConfig", "SubsampleResult", "apply_mask", "resample_set", "subsample",
    "TrainConfig", "TrainLog", "loss_decomposition_check", "masked_loss", "train_zero_shot",
]
