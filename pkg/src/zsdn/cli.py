"""Command-line interface.

Subcommands: simulate | train | denoise | eval | ablate. Each run writes its
fully resolved config to ``<out>/config.json`` so it can be reproduced
bit-for-bit with ``--config``. Exit codes: 0 success, 2 invalid arguments or
config, 3 runtime failure (I/O, divergence).
"""

import argparse
import json
import sys

from . import experiments
from .errors import RuntimeFailure, ValidationError

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file; flags override its values")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, help="base RNG seed")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zsdn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a phantom and noisy realizations")
    _add_common(p)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--a", type=float, help="single shot-noise level (replaces default levels)")
    p.add_argument("--b", type=float, help="single read-noise level (requires --a)")

    p = sub.add_parser("train", help="zero-shot train a denoiser on one noisy image")
    _add_common(p)
    p.add_argument("--noisy", help="noisy input image (.f32 or .png)")
    p.add_argument("--clean", help="optional ground truth for per-epoch PSNR logging")
    p.add_argument("--stride", type=int)
    p.add_argument("--strategy", choices=("random", "fixed"))
    p.add_argument("--fixed-offset", type=int, dest="fixed_offset")
    p.add_argument("--base-channels", type=int, dest="base_channels")
    p.add_argument("--depth", type=int)
    p.add_argument("--feature-channels", type=int, dest="feature_channels")
    p.add_argument("--upsampling", choices=("pixel_shuffle", "transposed_conv", "bilinear"))
    p.add_argument("--patch", type=int, dest="patch_size")
    p.add_argument("--batch", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--iters", type=int, dest="iters_per_epoch")
    p.add_argument("--lr", type=float)

    p = sub.add_parser("denoise", help="ensemble-restore a noisy image with a checkpoint")
    _add_common(p)
    p.add_argument("--noisy")
    p.add_argument("--checkpoint")
    p.add_argument("--clean", help="optional ground truth; adds PSNR/SSIM and an error map")
    p.add_argument("--m", type=int, help="ensemble size (number of sub-samplings)")
    p.add_argument("--tile", type=int, help="tile size for large images")
    p.add_argument("--data-range", type=float, dest="data_range")

    p = sub.add_parser("eval", help="PSNR/SSIM between two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--data-range", type=float, dest="data_range")
    p.add_argument("--out", help="optional output directory for report.json")

    p = sub.add_parser("ablate", help="run one ablation sweep and emit a results table")
    _add_common(p)
    p.add_argument("--axis", choices=experiments.ABLATION_AXES)
    p.add_argument("--clean", help="clean image path; a default phantom is generated if omitted")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--base-channels", type=int, dest="base_channels")
    p.add_argument("--depth", type=int)
    p.add_argument("--feature-channels", type=int, dest="feature_channels")
    p.add_argument("--patch", type=int, dest="patch_size")
    p.add_argument("--batch", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--iters", type=int, dest="iters_per_epoch")
    p.add_argument("--lr", type=float)
    p.add_argument("--m", type=int)
    return parser


def _resolve_config(args: argparse.Namespace, defaults: dict, keys: tuple) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        for key, val in file_cfg.items():
            if key in cfg:
                cfg[key] = val
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "simulate":
        cfg = _resolve_config(args, experiments.simulate_defaults(),
                              ("height", "width", "seed"))
        if args.a is not None or args.b is not None:
            if args.a is None or args.b is None:
                raise ValidationError("--a and --b must be given together")
            cfg["levels"] = [[args.a, args.b]]
        report = experiments.run_simulate(cfg, args.out)
        for level in report["levels"]:
            print(f"a={level['a']:g} b={level['b']:g} snr={level['snr_db']:.2f} dB -> {level['file']}")
        return 0

    if args.command == "train":
        keys = ("noisy", "clean", "stride", "strategy", "fixed_offset", "base_channels",
                "depth", "feature_channels", "upsampling", "patch_size", "batch_size",
                "epochs", "iters_per_epoch", "lr", "seed")
        cfg = _resolve_config(args, experiments.train_defaults(), keys)
        ckpt = experiments.run_train(cfg, args.out)
        print(f"checkpoint: {ckpt}")
        return 0

    if args.command == "denoise":
        keys = ("noisy", "checkpoint", "clean", "m", "tile", "data_range", "seed")
        cfg = _resolve_config(args, experiments.denoise_defaults(), keys)
        report = experiments.run_denoise(cfg, args.out)
        line = f"denoised with m={report['m']}"
        if "psnr" in report:
            line += f" psnr={report['psnr']:.2f} dB ssim={report['ssim']:.4f}"
        print(line)
        return 0

    if args.command == "eval":
        report = experiments.run_eval(args.ref, args.test, args.data_range, args.out)
        print(json.dumps(report))
        return 0

    # ablate
    keys = ("axis", "clean", "a", "b", "height", "width", "base_channels", "depth",
            "feature_channels", "patch_size", "batch_size", "epochs", "iters_per_epoch",
            "lr", "m", "seed")
    cfg = _resolve_config(args, experiments.ablate_defaults(), keys)
    rows = experiments.run_ablate(cfg, args.out)
    for row in rows:
        print(json.dumps(row))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RuntimeFailure, OSError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
