# shadowformer/main.py

import argparse
import sys
from typing import List, Optional

import torch

from shadowformer import __version__
from shadowformer.commands import ablate, evaluate, infer, synth, train, viz_attn
from shadowformer.commands.common import common_parser
from shadowformer.config import get_settings
from shadowformer.exceptions import ShadowFormerError
from shadowformer.utils.logging import log_debug, log_error, setup_logging

# Rejestracja komend
COMMANDS = (synth, train, evaluate, infer, ablate, viz_attn)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shadowformer",
        description="Mask-guided transformer shadow removal: synthesis, training, evaluation and attention maps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    parents = [common_parser()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    settings = get_settings()
    setup_logging(settings.log_level, color=not settings.no_color)
    if settings.num_threads > 0:
        torch.set_num_threads(settings.num_threads)

    try:
        return args.handler(args)
    except (ShadowFormerError, ValueError, OSError) as exc:
        log_error(f"{args.command}: {exc}")
        log_debug(f"{type(exc).__name__} while running {args.command}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
