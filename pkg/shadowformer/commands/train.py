# shadowformer/commands/train.py

import argparse
from pathlib import Path

from shadowformer.commands.common import crop_size, load_run_config, non_negative_int, positive_int, real
from shadowformer.models.shadowformer import param_count
from shadowformer.schemas.train_config import TRAIN_PRESETS
from shadowformer.tasks.train import HISTORY_FILE, MODEL_FILE, run_train


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "train",
        parents=parents,
        help="train a model with the l1 loss",
        description="AdamW with cosine-annealed learning rate; writes model.pt, checkpoints/ and loss.csv under --out.",
    )
    parser.add_argument("--train-preset", choices=tuple(TRAIN_PRESETS), help="desk (crop 64) or full (crop 256)")
    parser.add_argument("--steps", type=non_negative_int, help="total optimizer steps")
    parser.add_argument("--batch-size", type=positive_int)
    parser.add_argument("--crop", type=crop_size, help="square crop size, or 'none'")
    parser.add_argument("--lr", type=real, help="initial learning rate")
    parser.add_argument("--max-grad-norm", type=real, help="clip gradients to this global norm")
    parser.add_argument("--checkpoint-every", type=non_negative_int, help="steps between checkpoints (0 = only at the end)")
    parser.add_argument("--cache-size", type=non_negative_int, help="decoded triplets kept in memory (0 = decode every batch)")
    parser.add_argument("--resume", type=Path, help="checkpoint to continue from (same model and training settings)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    train = {
        "total_steps": args.steps,
        "batch_size": args.batch_size,
        "crop_size": args.crop,
        "lr_init": args.lr,
        "max_grad_norm": args.max_grad_norm,
        "checkpoint_every": args.checkpoint_every,
        "cache_size": args.cache_size,
    }
    cfg = load_run_config(args, {"run": {"train_preset": args.train_preset}, "train": train})

    print(f"parameters: {param_count(cfg.model)}")
    result = run_train(cfg, resume=args.resume)
    final = result.history[-1].loss if result.history else float("nan")
    print(f"steps={result.state.step} final_loss={final!r} model={cfg.out / MODEL_FILE} history={cfg.out / HISTORY_FILE}")
    return 0
