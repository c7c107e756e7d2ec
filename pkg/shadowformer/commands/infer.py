# shadowformer/commands/infer.py

import argparse
from pathlib import Path
from typing import List, Tuple

from shadowformer.commands.common import load_run_config
from shadowformer.exceptions import LayoutError
from shadowformer.models.shadowformer import set_sigma
from shadowformer.services.checkpoint import load_model
from shadowformer.services.imaging import SUPPORTED_SUFFIXES
from shadowformer.tasks.evaluate import predict_files
from shadowformer.utils.logging import log_success


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "infer",
        parents=parents,
        help="remove shadows from an image/mask pair or a pair of folders",
        description="Inputs of any size are padded to the model's size multiple and cropped back.",
    )
    parser.add_argument("--checkpoint", type=Path, required=True)
    parser.add_argument("--image", type=Path, required=True, help="shadow image, or a folder of them")
    parser.add_argument("--mask", type=Path, required=True, help="shadow mask, or a folder with matching stems")
    parser.set_defaults(handler=run)


def pair_inputs(image: Path, mask: Path) -> List[Tuple[Path, Path]]:
    if not image.exists():
        raise FileNotFoundError(f"image not found: {image}")
    if not mask.exists():
        raise FileNotFoundError(f"mask not found: {mask}")
    if image.is_file() and mask.is_file():
        return [(image, mask)]
    if not (image.is_dir() and mask.is_dir()):
        raise ValueError("--image and --mask must both be files or both be folders")

    def index(folder: Path):
        return {
            p.stem.lower(): p
            for p in sorted(folder.iterdir())
            if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES
        }

    images, masks = index(image), index(mask)
    unmatched = sorted(set(images) ^ set(masks))
    if unmatched:
        raise LayoutError("image and mask folders do not match", unmatched)
    if not images:
        raise LayoutError(f"no images found in {image}")
    return [(images[k], masks[k]) for k in sorted(images)]


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    pairs = pair_inputs(args.image, args.mask)
    model, checkpoint = load_model(args.checkpoint)
    if args.sigma is not None:
        set_sigma(model, args.sigma)
    paths = predict_files(model, pairs, cfg.out)
    log_success(f"wrote {len(paths)} results (checkpoint step {checkpoint.step}) to {cfg.out}")
    for path in paths:
        print(path)
    return 0
