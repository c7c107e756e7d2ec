# shadowformer/schemas/model_config.py

from typing import Dict, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    embed_dim: int = Field(32, ge=1)
    depth: int = Field(3, ge=1)
    window_size: int = Field(8, ge=1)
    sigma: float = Field(0.2, ge=0.0, lt=1.0)
    heads: int = Field(1, ge=1)
    mlp_ratio: float = Field(4.0, gt=0.0)
    se_reduction: int = Field(4, ge=1)
    blocks_per_stage: int = Field(2, ge=2, le=2)
    sim_blocks: int = Field(2, ge=2, le=2)
    concat_mask_input: bool = True

    # ablation switches
    encoder_block: Literal["ca", "sa"] = "ca"
    bottleneck_block: Literal["sia", "ca"] = "sia"

    @model_validator(mode="after")
    def _check_invariants(self) -> "ModelConfig":
        if self.bottleneck_dim % self.heads:
            raise ValueError(f"bottleneck width {self.bottleneck_dim} is not divisible by heads={self.heads}")
        if self.encoder_block == "sa" and self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} is not divisible by heads={self.heads}")
        if self.embed_dim < self.se_reduction:
            raise ValueError(f"embed_dim {self.embed_dim} is smaller than se_reduction={self.se_reduction}")
        return self

    @property
    def bottleneck_dim(self) -> int:
        return self.embed_dim * 2 ** self.depth

    @property
    def size_multiple(self) -> int:
        """Input H and W must be multiples of this (2^L downsamplings, then P×P windows)."""
        return 2 ** self.depth * self.window_size

    def stage_dim(self, level: int) -> int:
        return self.embed_dim * 2 ** level

    def hidden_dim(self, dim: int) -> int:
        return max(1, int(round(self.mlp_ratio * dim)))

    def squeeze_dim(self, dim: int) -> int:
        return max(1, dim // self.se_reduction)


# Small/Large MLP widths put the trainable-parameter count inside the
# bands around 2.4M / 9.3M; mlp_ratio=4 with this block layout gives 0.45M / 3.3M.
# These ratios are a calibration of this layout, not published hyperparameters.
MODEL_PRESETS: Dict[str, ModelConfig] = {
    "gradcheck": ModelConfig(embed_dim=8, depth=1, window_size=4),
    "toy": ModelConfig(embed_dim=16, depth=2, window_size=8),
    "small": ModelConfig(embed_dim=24, depth=2, window_size=8, mlp_ratio=36.0),
    "large": ModelConfig(embed_dim=32, depth=3, window_size=8, mlp_ratio=18.0),
}


def model_preset(name: str) -> ModelConfig:
    try:
        return MODEL_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; expected one of {', '.join(MODEL_PRESETS)}") from None
