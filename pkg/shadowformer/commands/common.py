# shadowformer/commands/common.py

import argparse
from pathlib import Path
from typing import Any, Dict, Optional, Union

from shadowformer.config import Overrides, build_run_config
from shadowformer.schemas.dataset import LAYOUTS
from shadowformer.schemas.model_config import MODEL_PRESETS
from shadowformer.schemas.run_config import RunConfig
from shadowformer.utils.convert import parse_float_list, parse_int_list, parse_point, to_float, to_int


# =============================================================================
# ARGUMENT TYPES (bad values are usage errors, exit 2)
# =============================================================================

def non_negative_int(text: str) -> int:
    value = to_int(text)
    if value is None or str(value) != text.strip().lstrip("+") or value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return value


def positive_int(text: str) -> int:
    value = non_negative_int(text)
    if value == 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def crop_size(text: str) -> Union[int, str]:
    """Positive size, or "none" (left for TrainConfig to turn into None)."""

    if text.strip().lower() in ("none", "off"):
        return "none"
    return positive_int(text)


def real(text: str) -> float:
    value = to_float(text)
    if value is None:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    return value


def int_list(text: str):
    try:
        return parse_int_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def float_list(text: str):
    try:
        return parse_float_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def point(text: str):
    try:
        return parse_point(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# =============================================================================
# COMMON FLAGS
# =============================================================================

def common_parser() -> argparse.ArgumentParser:
    """Flags every subcommand accepts; all default to None so the config file decides."""

    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("common options")
    group.add_argument("--config", type=Path, help="INI file with [run]/[model]/[train]/[data]/[eval]/[synth] sections")
    group.add_argument("--seed", type=int, help="run seed; every component seed is derived from it")
    group.add_argument("--out", type=Path, help="output directory")
    group.add_argument("--dataset-root", type=Path, help="dataset root directory")
    group.add_argument("--layout", choices=LAYOUTS, help="dataset directory layout")
    group.add_argument("--variant", choices=tuple(MODEL_PRESETS), help="model size preset")
    group.add_argument("--resolution", choices=("256", "original"), help="evaluate at 256x256 or at the original size")
    group.add_argument("--rmse-mode", choices=("mae", "rms"), help="LAB error convention")
    group.add_argument("--sigma", type=real, help="correlation-map weight in [0, 1)")
    return parser


def common_overrides(args: argparse.Namespace) -> Overrides:
    return {
        "run": {"seed": args.seed, "out": args.out, "variant": args.variant},
        "data": {"root": args.dataset_root, "layout": args.layout},
        "eval": {"resolution": args.resolution, "rmse_mode": args.rmse_mode},
        "model": {"sigma": args.sigma},
    }


def load_run_config(args: argparse.Namespace, extra: Optional[Overrides] = None) -> RunConfig:
    """Merge presets, the --config file and the command line."""

    overrides = common_overrides(args)
    for section, values in (extra or {}).items():
        merged: Dict[str, Any] = dict(overrides.get(section, {}))
        merged.update(values)
        overrides[section] = merged
    return build_run_config(args.config, overrides)
