# shadowformer/config.py

import configparser
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

from shadowformer.exceptions import ConfigError
from shadowformer.schemas.dataset import DatasetSpec, Split
from shadowformer.schemas.model_config import model_preset
from shadowformer.schemas.run_config import DataConfig, EvalConfig, RunConfig, SynthConfig
from shadowformer.schemas.train_config import TRAIN_PRESETS
from shadowformer.utils.model_helpers import apply_model_fields


# =============================================================================
# ENVIRONMENT SETTINGS
# =============================================================================

class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SHADOWFORMER_", env_file=".env", extra="ignore")

    num_threads: int = 0  # 0 keeps the torch default
    synth_workers: int = 1
    eval_workers: int = 1
    log_level: str = "INFO"
    no_color: bool = False


@lru_cache
def get_settings() -> Settings:
    return Settings()


# =============================================================================
# RUN CONFIG (INI FILE + FLAG OVERRIDES)
# =============================================================================

RUN_KEYS = ("seed", "out", "variant", "train_preset")
SECTIONS = ("run", "model", "train", "data", "eval", "synth")

Overrides = Dict[str, Dict[str, Any]]


def read_config_file(path: Path) -> Overrides:
    """Parse `[section]` / `key = value` text into raw string sections."""

    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")

    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str  # keep key case
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    sections: Overrides = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{name}]")
        sections[name] = dict(parser.items(name))
    return sections


def build_run_config(config_path: Optional[Path] = None, overrides: Optional[Overrides] = None) -> RunConfig:
    """schema defaults < variant preset < config file < command-line overrides."""

    layers = [read_config_file(config_path)] if config_path else []
    layers.append(overrides or {})

    run: Dict[str, Any] = {}
    for layer in layers:
        section = layer.get("run", {})
        unknown = sorted(k for k in section if k not in RUN_KEYS)
        if unknown:
            raise ConfigError(f"[run] unknown key(s): {', '.join(unknown)}")
        run.update({k: v for k, v in section.items() if v is not None})

    variant = str(run.get("variant", "toy"))
    train_preset = str(run.get("train_preset", "desk"))
    try:
        model = model_preset(variant)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if train_preset not in TRAIN_PRESETS:
        raise ConfigError(f"unknown train preset {train_preset!r}; expected one of {', '.join(TRAIN_PRESETS)}")
    train = TRAIN_PRESETS[train_preset]
    data, evaluation, synth = DataConfig(), EvalConfig(), SynthConfig()

    for layer in layers:
        model = apply_model_fields(model, layer.get("model", {}), "model")
        train = apply_model_fields(train, layer.get("train", {}), "train")
        data = apply_model_fields(data, layer.get("data", {}), "data")
        evaluation = apply_model_fields(evaluation, layer.get("eval", {}), "eval")
        synth = apply_model_fields(synth, layer.get("synth", {}), "synth")

    base = RunConfig(variant=variant, train_preset=train_preset)
    config = apply_model_fields(
        base,
        {"seed": run.get("seed"), "out": run.get("out")},
        "run",
    )
    # one seed drives every component
    train = apply_model_fields(train, {"seed": config.seed}, "train")
    return config.model_copy(update={"model": model, "train": train, "data": data, "eval": evaluation, "synth": synth})


def dataset_spec(cfg: RunConfig, split: Split) -> DatasetSpec:
    if cfg.data.root is None:
        raise ConfigError("no dataset root given (--dataset-root or [data] root)")
    return DatasetSpec(root=cfg.data.root, layout=cfg.data.layout, split=split, mask_root=cfg.data.mask_root)
