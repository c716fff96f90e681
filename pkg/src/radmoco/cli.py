"""Command-line surface: simulate, reconstruct, evaluate, self-checks.

Every command takes its settings from flags plus an optional `key = value`
config file (see `runconfig`); no environment variables are consulted.
All outputs land in the config's `out_dir`.  Commands exit 0 on success
and nonzero with a message on stderr for invalid inputs, unreadable or
corrupt files, or failed check suites.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .checks import run_fsc_check, run_gradcheck
from .estimator import RadialMocoReconstructor
from .fileio import (
    read_dataset,
    read_image,
    read_motion_csv,
    save_checkpoint,
    write_dataset,
    write_image,
    write_metrics_csv,
    write_motion_csv,
    write_pgm,
    write_train_log,
)
from .metrics import evaluate
from .runconfig import RunConfig, acquisition_spec, load_config
from .simulate import simulate_dataset


def _load(config_path) -> RunConfig:
    if config_path is None:
        return RunConfig()
    return load_config(config_path)


def cmd_simulate(args) -> int:
    """Write dataset.monr, gt_image.monr, gt_motion.csv into out_dir."""
    rc = _load(args.config)
    spec = acquisition_spec(rc)
    kspace, image, _ = simulate_dataset(spec)
    os.makedirs(rc.out_dir, exist_ok=True)
    dataset_path = os.path.join(rc.out_dir, "dataset.monr")
    image_path = os.path.join(rc.out_dir, "gt_image.monr")
    motion_path = os.path.join(rc.out_dir, "gt_motion.csv")
    write_dataset(dataset_path, kspace)
    write_image(image_path, image, fov_mm=spec.resolved_fov_mm)
    write_motion_csv(motion_path, kspace.gt_motion)
    print(f"wrote {dataset_path} ({kspace.n_views} views, spoke length {kspace.m})")
    print(f"wrote {image_path}")
    print(f"wrote {motion_path}")
    return 0


def _estimator(rc: RunConfig, args) -> RadialMocoReconstructor:
    return RadialMocoReconstructor(
        epochs=rc.epochs,
        rays_per_step=rc.rays_per_step,
        lr0=rc.lr0,
        lr_halving_period=rc.lr_halving_period,
        encoding=args.encoding or rc.encoding,
        lambda_start=rc.lambda_start,
        lambda_end=rc.lambda_end,
        lambda_ramp_fraction=rc.lambda_ramp_fraction,
        forward_arm=args.arm or rc.forward_arm,
        motion_enabled=False if args.no_moco else rc.motion_enabled,
        motion_granularity=rc.motion_granularity,
        motion_fit_fraction=rc.motion_fit_fraction,
        levels=rc.levels,
        features_per_level=rc.features_per_level,
        table_size=rc.table_size,
        base_resolution=rc.base_resolution,
        growth_factor=rc.growth_factor,
        domain_margin=rc.domain_margin,
        mlp_width=rc.mlp_width,
        seed=rc.seed,
    )


def cmd_reconstruct(args) -> int:
    """Fit the model to a dataset; write image, motion, log, and preview."""
    rc = _load(args.config)
    dataset = read_dataset(args.data)
    model = _estimator(rc, args).fit(dataset)
    os.makedirs(rc.out_dir, exist_ok=True)
    recon_path = os.path.join(rc.out_dir, "recon.monr")
    motion_path = os.path.join(rc.out_dir, "est_motion.csv")
    log_path = os.path.join(rc.out_dir, "train_log.csv")
    preview_path = os.path.join(rc.out_dir, "recon.pgm")
    checkpoint_path = os.path.join(rc.out_dir, "checkpoint.npz")
    write_image(recon_path, model.image_, fov_mm=dataset.fov_mm)
    write_motion_csv(motion_path, model.motion_)
    write_train_log(log_path, model.history_)
    write_pgm(preview_path, model.image_)
    save_checkpoint(checkpoint_path, model.state_)
    final_loss = model.history_[-1][1]
    print(f"fit {dataset.n_views} views for {rc.epochs} epochs, final loss {final_loss:.6g}")
    for path in (recon_path, motion_path, log_path, preview_path, checkpoint_path):
        print(f"wrote {path}")
    return 0


def cmd_evaluate(args) -> int:
    """Compare a reconstruction against ground truth; write metrics CSV."""
    recon, _ = read_image(args.recon)
    gt, _ = read_image(args.gt)
    est = read_motion_csv(args.est_motion)
    gt_motion = read_motion_csv(args.gt_motion)
    report = evaluate(recon, gt, est, gt_motion)
    write_metrics_csv(args.out, report)
    print(
        f"psnr_db={report.psnr_db:.4f} ssim={report.ssim:.6f} "
        f"sigma_rot_deg={report.sigma_rot_deg:.6f} sigma_shift_px={report.sigma_shift_px:.6f} "
        f"l1_rot_deg={report.l1_rot_deg:.6f} l1_shift_px={report.l1_shift_px:.6f} "
        f"psnr_capped={'true' if report.psnr_capped else 'false'}"
    )
    print(f"wrote {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    """Finite-difference check of all gradient classes."""
    report = run_gradcheck(seed=args.seed, inject_fault=args.inject_fault)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def cmd_fsc_check(_args) -> int:
    """Fourier-slice consistency suite."""
    report = run_fsc_check()
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radmoco",
        description=(
            "Joint rigid-motion correction and reconstruction for "
            "undersampled radial MRI"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a motion-corrupted radial dataset")
    p.add_argument("--config", help="key=value config file (defaults if omitted)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("reconstruct", help="jointly fit image and motion to a dataset")
    p.add_argument("--config", help="key=value config file (defaults if omitted)")
    p.add_argument("--data", required=True, help="dataset .monr file")
    p.add_argument(
        "--no-moco",
        action="store_true",
        help="freeze motion at identity (ablation arm)",
    )
    p.add_argument(
        "--arm",
        choices=("projection", "kspace"),
        help="forward-model arm (overrides config)",
    )
    p.add_argument(
        "--encoding",
        choices=("coarse2fine", "fine", "coarse"),
        help="hash-encoding schedule arm (overrides config)",
    )
    p.set_defaults(fn=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score a reconstruction against ground truth")
    p.add_argument("--recon", required=True, help="reconstructed image .monr")
    p.add_argument("--gt", required=True, help="ground-truth image .monr")
    p.add_argument("--est-motion", required=True, help="estimated motion CSV")
    p.add_argument("--gt-motion", required=True, help="ground-truth motion CSV")
    p.add_argument("--out", default="metrics.csv", help="metrics CSV path")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--inject-fault",
        action="store_true",
        help="corrupt one gradient class (the suite must then fail)",
    )
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("fsc-check", help="Fourier-slice consistency suite")
    p.set_defaults(fn=cmd_fsc_check)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(fn=lambda _args: print(__version__) or 0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, TypeError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
