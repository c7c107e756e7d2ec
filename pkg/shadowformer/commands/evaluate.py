# shadowformer/commands/evaluate.py

import argparse
from pathlib import Path

from shadowformer.commands.common import load_run_config, non_negative_int
from shadowformer.config import get_settings
from shadowformer.tasks.evaluate import run_eval


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "eval",
        parents=parents,
        help="region-wise PSNR / SSIM / LAB error on the test split",
        description=(
            "Evaluate result images (--results) or a checkpoint (--checkpoint, inference first) against the "
            "shadow-free ground truth of --dataset-root. Prints the S / NS / ALL table and writes report.txt and "
            "report.csv under --out."
        ),
    )
    parser.add_argument("--results", type=Path, help="directory of result images named like the test stems")
    parser.add_argument("--checkpoint", type=Path, help="model checkpoint to run over the test split")
    parser.add_argument("--workers", type=non_negative_int, help="parallel evaluators (default from settings)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args, {"eval": {"results": args.results, "checkpoint": args.checkpoint}})
    report = run_eval(cfg, workers=args.workers or get_settings().eval_workers, sigma=args.sigma)
    label = Path(cfg.eval.results).name if cfg.eval.results and not cfg.eval.checkpoint else "model"
    print(report.format_table(label), end="")
    return 0
