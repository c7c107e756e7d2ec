# shadowformer/commands/synth.py

import argparse

from shadowformer.commands.common import load_run_config, non_negative_int, real
from shadowformer.config import get_settings
from shadowformer.tasks.synth import run_synth


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "synth",
        parents=parents,
        help="generate Retinex-composited shadow triplets",
        description="Write train (and held-out test) triplets in the ISTD layout plus index,seed,coverage manifests.",
    )
    parser.add_argument("--n", type=non_negative_int, help="number of train triplets")
    parser.add_argument("--n-test", type=non_negative_int, help="number of held-out test triplets")
    parser.add_argument("--size", type=non_negative_int, help="image height and width (>= 16)")
    parser.add_argument("--feather", type=non_negative_int, help="soft penumbra width in pixels (0 = hard edge)")
    parser.add_argument("--illum-jitter", type=real, help="shadow-free illumination gain drawn from 1 +- jitter")
    parser.add_argument("--workers", type=non_negative_int, help="parallel writers (default from settings)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(
        args,
        {"synth": {"n": args.n, "n_test": args.n_test, "size": args.size, "feather": args.feather, "illum_jitter": args.illum_jitter}},
    )
    workers = args.workers or get_settings().synth_workers
    summary = run_synth(cfg.synth, cfg.seed, cfg.out, workers=workers)
    print(f"train={summary['train']} test={summary['test']} mean_coverage={summary['mean_coverage']:.4f} out={summary['out']}")
    return 0
