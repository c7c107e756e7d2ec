# shadowformer/commands/ablate.py

import argparse

from shadowformer.commands.common import float_list, int_list, load_run_config, non_negative_int
from shadowformer.schemas.metrics_report import format_region_table
from shadowformer.tasks.ablate import run_ablation


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "ablate",
        parents=parents,
        help="train and evaluate the ablation variants on one seed and budget",
        description=(
            "Variants: 1 = window self-attention instead of channel attention in encoder/decoder; "
            "2 = channel-attention-only bottleneck; 3 = bottleneck attention without the correlation map "
            "(sigma = 0); 4 = full model."
        ),
    )
    parser.add_argument("--variants", type=int_list, default=[1, 2, 3, 4], help="comma-separated subset of 1,2,3,4")
    parser.add_argument("--sigma-sweep", type=float_list, default=[], help="extra full-model rows, e.g. 0,0.1,0.2,0.3")
    parser.add_argument("--steps", type=non_negative_int, help="training steps per variant")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args, {"train": {"total_steps": args.steps}})
    rows = run_ablation(cfg, variants=args.variants, sigma_sweep=args.sigma_sweep)
    print(format_region_table(rows, metrics=("psnr", "ssim")))
    return 0
