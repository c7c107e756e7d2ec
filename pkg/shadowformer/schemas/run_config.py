# shadowformer/schemas/run_config.py

from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from shadowformer.schemas.dataset import Layout
from shadowformer.schemas.metrics_report import RmseConvention
from shadowformer.schemas.model_config import ModelConfig
from shadowformer.schemas.train_config import TrainConfig

Resolution = Literal["256", "original"]


def _optional_path(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in ("", "none"):
        return None
    return value


class DataConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    root: Optional[Path] = None
    layout: Layout = "synthetic"
    mask_root: Optional[Path] = None

    @field_validator("root", "mask_root", mode="before")
    @classmethod
    def _blank_paths(cls, value: Any) -> Any:
        return _optional_path(value)


class EvalConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    resolution: Resolution = "256"
    rmse_mode: RmseConvention = "mae"
    results: Optional[Path] = None
    checkpoint: Optional[Path] = None

    @field_validator("resolution", mode="before")
    @classmethod
    def _resolution_text(cls, value: Any) -> Any:
        return str(value).strip() if value is not None else value

    @field_validator("results", "checkpoint", mode="before")
    @classmethod
    def _blank_paths(cls, value: Any) -> Any:
        return _optional_path(value)


class SynthConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(256, ge=0)
    n_test: int = Field(32, ge=0)
    size: int = Field(64, ge=16)
    feather: int = Field(0, ge=0)
    illum_jitter: float = Field(0.0, ge=0.0, lt=1.0)


class RunConfig(BaseModel):
    """Every setting a command can read, after merging presets, the INI file and flags."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = 0
    out: Path = Path("runs/default")
    variant: str = "toy"
    train_preset: str = "desk"

    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    data: DataConfig = DataConfig()
    eval: EvalConfig = EvalConfig()
    synth: SynthConfig = SynthConfig()
