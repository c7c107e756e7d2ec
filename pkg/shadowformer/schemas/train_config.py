# shadowformer/schemas/train_config.py

from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from shadowformer.utils.convert import parse_float_list


def _none_if_blank(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in ("", "none", "off"):
        return None
    return value


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lr_init: float = Field(2e-4, ge=0.0)
    lr_final: float = Field(1e-6, ge=0.0)
    betas: Tuple[float, float] = (0.9, 0.999)
    weight_decay: float = Field(0.02, ge=0.0)
    total_steps: int = Field(2000, ge=0)
    batch_size: int = Field(4, ge=1)
    crop_size: Optional[int] = Field(64, ge=1)
    seed: int = 0
    augment_flips: bool = True
    cache_size: int = Field(0, ge=0)  # decoded triplets kept in memory between batches
    max_grad_norm: Optional[float] = Field(None, gt=0.0)
    checkpoint_every: int = Field(500, ge=0)
    log_every: int = Field(100, ge=1)

    @field_validator("betas", mode="before")
    @classmethod
    def _parse_betas(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(parse_float_list(value.strip("()[] ")))
        return value

    @field_validator("crop_size", "max_grad_norm", mode="before")
    @classmethod
    def _parse_optional(cls, value: Any) -> Any:
        return _none_if_blank(value)

    @model_validator(mode="after")
    def _check_schedule(self) -> "TrainConfig":
        if self.lr_final > self.lr_init:
            raise ValueError(f"lr_final {self.lr_final} exceeds lr_init {self.lr_init}")
        return self


TRAIN_PRESETS: Dict[str, TrainConfig] = {
    "desk": TrainConfig(),
    "full": TrainConfig(crop_size=256),
}


class HistoryRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: int
    lr: float
    loss: float

    def to_csv_line(self) -> str:
        return f"{self.step},{self.lr!r},{self.loss!r}"
