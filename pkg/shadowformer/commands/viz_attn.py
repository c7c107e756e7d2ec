# shadowformer/commands/viz_attn.py

import argparse
from pathlib import Path

from shadowformer.commands.common import load_run_config, point
from shadowformer.models.shadowformer import set_sigma
from shadowformer.services.checkpoint import load_model
from shadowformer.services.imaging import load_image, load_mask
from shadowformer.tasks.viz_attn import run_viz


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "viz-attn",
        parents=parents,
        help="heatmaps of the bottleneck attention for chosen key points",
        description="For each --point x,y, writes the reweighted attention row of its bottleneck patch over the input.",
    )
    parser.add_argument("--checkpoint", type=Path, required=True)
    parser.add_argument("--image", type=Path, required=True)
    parser.add_argument("--mask", type=Path, required=True)
    parser.add_argument("--point", type=point, action="append", required=True, help="pixel x,y (repeatable)")
    parser.add_argument("--block", type=int, default=0, help="which shadow-interaction block to read")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    model, _ = load_model(args.checkpoint)
    if args.sigma is not None:
        set_sigma(model, args.sigma)
    image = load_image(args.image)
    if image.shape[0] == 1:
        image = image.expand(3, -1, -1).clone()
    written = run_viz(model, image, load_mask(args.mask), args.point, cfg.out, block=args.block)
    for path in written.values():
        print(path)
    return 0
