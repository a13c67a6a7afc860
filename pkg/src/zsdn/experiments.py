"""End-to-end experiment runners shared by the CLI and the acceptance suite.

Every runner takes a plain config dict (what the CLI writes to
``config.json``), fills in defaults, does the work, and returns the resolved
config plus its outputs. Re-running a runner from the resolved config
reproduces the outputs bit-identically.
"""

import json
import os
from dataclasses import asdict

import numpy as np

from . import metrics, network
from .errors import ValidationError
from .imagecore import center_crop_to_multiple
from .inference import MMSEConfig, denoise_mmse
from .noisemodel import NoiseParams, corrupt, snr_db
from .phantom import LatticeSpec, generate_lattice, load_image, read_sidecar, save_image
from .rng import derive_seed
from .subsampler import SamplerConfig
from .trainer import TrainConfig, train_zero_shot

__all__ = [
    "default_phantom_spec",
    "simulate_defaults",
    "train_defaults",
    "denoise_defaults",
    "ablate_defaults",
    "run_simulate",
    "run_train",
    "run_denoise",
    "run_eval",
    "run_ablate",
    "gaussian_blur3",
    "ABLATION_AXES",
]

NOISE_LEVELS = ((0.1, 0.02), (0.05, 0.02), (0.02, 0.02))
ABLATION_AXES = ("stride", "sampling_strategy", "upsampling", "m_sweep")


def default_phantom_spec(height: int = 256, width: int = 256, seed: int = 7) -> LatticeSpec:
    """Bright jittered atomic columns on a dim background, two-site basis."""
    return LatticeSpec(
        height=height,
        width=width,
        vec1=(11.0, 4.0),
        vec2=(-4.0, 11.0),
        sigma=1.4,
        amplitude=1.0,
        basis=((0.0, 0.0, 1.0), (0.5, 0.5, 0.55)),
        background=0.12,
        jitter_sigma=0.3,
        seed=seed,
    )


def gaussian_blur3(img: np.ndarray) -> np.ndarray:
    """3x3 Gaussian blur (sigma 0.8, edge-replicated), a trivial baseline."""
    w = np.exp(-np.array([-1.0, 0.0, 1.0]) ** 2 / (2 * 0.8**2))
    w /= w.sum()
    pad = np.pad(img.astype(np.float64), 1, mode="edge")
    rows = np.lib.stride_tricks.sliding_window_view(pad, 3, axis=0)
    tmp = np.tensordot(rows, w, axes=([2], [0]))
    cols = np.lib.stride_tricks.sliding_window_view(tmp, 3, axis=1)
    return np.tensordot(cols, w, axes=([2], [0])).astype(np.float32)


def _merged(defaults: dict, overrides: dict) -> dict:
    cfg = dict(defaults)
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    return cfg


def _write_config(cfg: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _net_config(cfg: dict) -> network.NetConfig:
    return network.NetConfig(
        stride=cfg["stride"],
        base_channels=cfg["base_channels"],
        depth=cfg["depth"],
        feature_channels=cfg["feature_channels"],
        upsampling=cfg["upsampling"],
    )


def _train_config(cfg: dict) -> TrainConfig:
    sampler = SamplerConfig(
        stride=cfg["stride"],
        strategy=cfg["strategy"],
        fixed_offset=cfg["fixed_offset"],
        seed=derive_seed(cfg["seed"], 10),
    )
    return TrainConfig(
        patch_size=cfg["patch_size"],
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        iters_per_epoch=cfg["iters_per_epoch"],
        lr=cfg["lr"],
        sampler=sampler,
        seed=cfg["seed"],
    )


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def simulate_defaults() -> dict:
    return {
        "command": "simulate",
        "height": 256,
        "width": 256,
        "levels": [list(level) for level in NOISE_LEVELS],
        "seed": 7,
        "phantom": asdict(default_phantom_spec()),
    }


def run_simulate(cfg: dict, out_dir: str) -> dict:
    spec_dict = dict(cfg["phantom"])
    spec_dict["height"] = cfg["height"]
    spec_dict["width"] = cfg["width"]
    spec_dict["seed"] = cfg["seed"]
    spec_dict["vec1"] = tuple(spec_dict["vec1"])
    spec_dict["vec2"] = tuple(spec_dict["vec2"])
    spec_dict["basis"] = tuple(tuple(b) for b in spec_dict["basis"])
    spec = LatticeSpec(**spec_dict)
    cfg = dict(cfg, phantom=asdict(spec))
    _write_config(cfg, out_dir)

    clean = generate_lattice(spec)
    save_image(clean, os.path.join(out_dir, "clean.f32"))
    report = {"clean": "clean.f32", "levels": []}
    for i, (a, b) in enumerate(cfg["levels"]):
        params = NoiseParams(a=a, b=b)
        noisy = corrupt(clean, params, derive_seed(cfg["seed"], 100 + i))
        name = f"noisy_a{a:g}_b{b:g}.f32"
        save_image(noisy, os.path.join(out_dir, name))
        report["levels"].append({"a": a, "b": b, "file": name, "snr_db": snr_db(clean, noisy)})
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def train_defaults() -> dict:
    return {
        "command": "train",
        "noisy": None,
        "clean": None,
        "stride": 2,
        "strategy": "random",
        "fixed_offset": 0,
        "base_channels": 32,
        "depth": 3,
        "feature_channels": 128,
        "upsampling": "pixel_shuffle",
        "patch_size": 128,
        "batch_size": 12,
        "epochs": 300,
        "iters_per_epoch": 1,
        "lr": 1e-4,
        "seed": 0,
    }


def run_train(cfg: dict, out_dir: str) -> str:
    if not cfg.get("noisy"):
        raise ValidationError("train requires a noisy input image path")
    _write_config(cfg, out_dir)
    noisy = load_image(cfg["noisy"])
    clean = load_image(cfg["clean"]) if cfg.get("clean") else None
    model, log = train_zero_shot(noisy, _net_config(cfg), _train_config(cfg), clean=clean)
    ckpt = os.path.join(out_dir, "checkpoint.zsdn")
    network.save_model(model, ckpt)
    with open(os.path.join(out_dir, "trainlog.jsonl"), "w") as fh:
        fh.write(log.to_jsonl())
    return ckpt


# ---------------------------------------------------------------------------
# denoise / eval
# ---------------------------------------------------------------------------

def denoise_defaults() -> dict:
    return {
        "command": "denoise",
        "noisy": None,
        "checkpoint": None,
        "clean": None,
        "m": 50,
        "seed": 123,
        "tile": None,
        "data_range": 1.0,
    }


def run_denoise(cfg: dict, out_dir: str) -> dict:
    if not cfg.get("noisy") or not cfg.get("checkpoint"):
        raise ValidationError("denoise requires --noisy and --checkpoint paths")
    _write_config(cfg, out_dir)
    model = network.load_model(cfg["checkpoint"])
    noisy = load_image(cfg["noisy"])
    sampler = SamplerConfig(stride=model.config.stride, seed=cfg["seed"])
    mmse = MMSEConfig(m=cfg["m"], sampler=sampler, tile=cfg.get("tile"))
    denoised = denoise_mmse(model, noisy, mmse)
    save_image(denoised, os.path.join(out_dir, "denoised.f32"), data_range=cfg["data_range"])

    report = {"m": cfg["m"], "output": "denoised.f32"}
    if cfg.get("clean"):
        clean = load_image(cfg["clean"])
        block = model.config.stride * (1 << model.config.depth)
        clean_c = center_crop_to_multiple(clean, block)
        rng_val = cfg["data_range"]
        report["psnr"] = metrics.psnr(clean_c, denoised, rng_val)
        report["ssim"] = metrics.ssim(clean_c, denoised, rng_val)
        report["data_range"] = rng_val
        save_image(metrics.error_map(clean_c, denoised), os.path.join(out_dir, "error_map.f32"))
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def run_eval(ref_path: str, test_path: str, data_range: float | None = None,
             out_dir: str | None = None) -> dict:
    ref = load_image(ref_path)
    test = load_image(test_path)
    if data_range is None:
        if ref_path.lower().endswith(".f32"):
            data_range = float(read_sidecar(ref_path).get("data_range", 1.0))
        else:
            data_range = float(ref.max()) if ref.max() > 0 else 1.0
    report = metrics.EvalReport(
        psnr=metrics.psnr(ref, test, data_range),
        ssim=metrics.ssim(ref, test, data_range),
        data_range=data_range,
    ).to_dict()
    if out_dir is not None:
        cfg = {"command": "eval", "ref": ref_path, "test": test_path, "data_range": data_range}
        _write_config(cfg, out_dir)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return report


# ---------------------------------------------------------------------------
# ablations
# ---------------------------------------------------------------------------

def ablate_defaults() -> dict:
    return {
        "command": "ablate",
        "axis": None,
        "clean": None,          # path; generated phantom when omitted
        "a": 0.05,
        "b": 0.02,
        "height": 192,
        "width": 192,
        "stride": 2,
        "strategy": "random",
        "fixed_offset": 0,
        "base_channels": 24,
        "depth": 3,
        "feature_channels": 144,   # divides s^2 for s in {2, 3, 4}
        "upsampling": "pixel_shuffle",
        "patch_size": 96,
        "batch_size": 8,
        "epochs": 150,
        "iters_per_epoch": 2,
        "lr": 1e-3,
        "m": 20,
        "seed": 0,
        "data_range": 1.0,
    }


def _ablate_clean(cfg: dict) -> np.ndarray:
    if cfg.get("clean"):
        return load_image(cfg["clean"])
    return generate_lattice(default_phantom_spec(cfg["height"], cfg["width"], seed=cfg["seed"] + 7))


def _eval_model(model, clean, noisy, cfg: dict, m: int, strategy: str = "random") -> dict:
    """Ensemble-restore ``noisy`` with ``model`` and score against ``clean``.

    The ensemble itself always draws randomly; ``strategy="fixed"`` is only
    meaningful for m=1, where it reproduces the plain-decimation input the
    fixed-trained network saw during training.
    """
    sampler = SamplerConfig(
        stride=cfg["stride"],
        strategy=strategy,
        fixed_offset=cfg["fixed_offset"],
        seed=derive_seed(cfg["seed"], 20),
    )
    out = denoise_mmse(model, noisy, MMSEConfig(m=m, sampler=sampler))
    block = cfg["stride"] * (1 << cfg["depth"])
    clean_c = center_crop_to_multiple(clean, block)
    return {
        "psnr": metrics.psnr(clean_c, out, cfg["data_range"]),
        "ssim": metrics.ssim(clean_c, out, cfg["data_range"]),
    }


def _train_eval(clean, noisy, cfg: dict, m: int) -> dict:
    """Train one model per ``cfg`` and evaluate the ensemble restoration."""
    model, _ = train_zero_shot(noisy, _net_config(cfg), _train_config(cfg))
    return _eval_model(model, clean, noisy, cfg, m)


def run_ablate(cfg: dict, out_dir: str) -> list[dict]:
    axis = cfg.get("axis")
    if axis not in ABLATION_AXES:
        raise ValidationError(f"axis must be one of {ABLATION_AXES}, got {axis!r}")
    _write_config(cfg, out_dir)
    clean = _ablate_clean(cfg)
    rows = []

    if axis == "stride":
        noisy = corrupt(clean, NoiseParams(cfg["a"], cfg["b"]), derive_seed(cfg["seed"], 1))
        for s in (2, 3, 4):
            block = s * (1 << cfg["depth"])
            patch = max((cfg["patch_size"] // block) * block, block)
            sub_cfg = dict(cfg, stride=s, patch_size=patch)
            res = _train_eval(clean, noisy, sub_cfg, cfg["m"])
            rows.append({"axis": axis, "stride": s, "patch_size": patch, "m": cfg["m"], **res})

    elif axis == "sampling_strategy":
        for a, b in NOISE_LEVELS:
            noisy = corrupt(clean, NoiseParams(a, b), derive_seed(cfg["seed"], 1))
            for strategy in ("fixed", "random"):
                sub_cfg = dict(cfg, strategy=strategy, a=a, b=b)
                model, _ = train_zero_shot(noisy, _net_config(sub_cfg), _train_config(sub_cfg))
                single = _eval_model(model, clean, noisy, sub_cfg, 1, strategy=strategy)
                ensemble = _eval_model(model, clean, noisy, sub_cfg, cfg["m"])
                rows.append({"axis": axis, "a": a, "b": b, "strategy": strategy, "m": 1, **single})
                rows.append({"axis": axis, "a": a, "b": b, "strategy": strategy,
                             "m": cfg["m"], **ensemble})

    elif axis == "upsampling":
        noisy = corrupt(clean, NoiseParams(cfg["a"], cfg["b"]), derive_seed(cfg["seed"], 1))
        for up in network.UPSAMPLINGS:
            sub_cfg = dict(cfg, upsampling=up)
            res = _train_eval(clean, noisy, sub_cfg, cfg["m"])
            rows.append({"axis": axis, "upsampling": up, "m": cfg["m"], **res})

    else:  # m_sweep
        noisy = corrupt(clean, NoiseParams(cfg["a"], cfg["b"]), derive_seed(cfg["seed"], 1))
        model, _ = train_zero_shot(noisy, _net_config(cfg), _train_config(cfg))
        sampler = SamplerConfig(stride=cfg["stride"], seed=derive_seed(cfg["seed"], 20))
        block = cfg["stride"] * (1 << cfg["depth"])
        clean_c = center_crop_to_multiple(clean, block)
        for m in (1, 5, 20, 50):
            out = denoise_mmse(model, noisy, MMSEConfig(m=m, sampler=sampler))
            rows.append({
                "axis": axis,
                "m": m,
                "psnr": metrics.psnr(clean_c, out, cfg["data_range"]),
                "ssim": metrics.ssim(clean_c, out, cfg["data_range"]),
            })

    with open(os.path.join(out_dir, "results.jsonl"), "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return rows
