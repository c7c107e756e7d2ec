# shadowformer/models/blocks.py

"""Transformer blocks. Every block maps a (B, C, H, W) feature map to one of the
same shape; internally the work is done on channel-last tokens.
"""

from typing import Optional, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from shadowformer.exceptions import ShapeError
from shadowformer.models.attention import (
    ShadowInteractionAttention,
    window_correlation,
    window_partition,
    window_reverse,
)
from shadowformer.schemas.model_config import ModelConfig


class ChannelAttention(nn.Module):
    """Squeeze-and-excitation gate over the last (channel) axis of (B, H, W, C)."""

    def __init__(self, dim: int, squeeze: int) -> None:
        super().__init__()
        self.fc = nn.Sequential(
            nn.Linear(dim, squeeze),
            nn.ReLU(inplace=True),
            nn.Linear(squeeze, dim),
            nn.Sigmoid(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        gate = self.fc(x.mean(dim=(1, 2), keepdim=True))
        return x * gate


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int) -> None:
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class _FeedForward(nn.Module):
    """x + GELU(MLP(LN(x))) on channel-last tokens."""

    def __init__(self, dim: int, cfg: ModelConfig) -> None:
        super().__init__()
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, cfg.hidden_dim(dim))

    def feed_forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.gelu(self.mlp(self.norm2(x))) + x


class CABlock(_FeedForward):
    """X~ = CA(LN(X)) + X;  X^ = GELU(MLP(LN(X~))) + X~."""

    def __init__(self, dim: int, cfg: ModelConfig) -> None:
        super().__init__(dim, cfg)
        self.norm1 = nn.LayerNorm(dim)
        self.ca = ChannelAttention(dim, cfg.squeeze_dim(dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x.permute(0, 2, 3, 1)
        x = self.ca(self.norm1(x)) + x
        return self.feed_forward(x).permute(0, 3, 1, 2)


class SABlock(_FeedForward):
    """Window self-attention in place of channel attention (encoder ablation)."""

    def __init__(self, dim: int, cfg: ModelConfig) -> None:
        super().__init__(dim, cfg)
        self.window_size = cfg.window_size
        self.norm1 = nn.LayerNorm(dim)
        self.attn = ShadowInteractionAttention(dim, heads=cfg.heads, sigma=0.0)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _, _, h, w = x.shape
        x = x.permute(0, 2, 3, 1)
        windows = self.attn(window_partition(self.norm1(x), self.window_size))
        x = window_reverse(windows, self.window_size, h, w) + x
        return self.feed_forward(x).permute(0, 3, 1, 2)


class SIMBlock(_FeedForward):
    """Shadow-interaction block: LN -> CA -> P x P windows -> reweighted attention -> merge, plus residual,
    followed by the feed-forward sub-block.
    """

    def __init__(self, dim: int, cfg: ModelConfig) -> None:
        super().__init__(dim, cfg)
        self.window_size = cfg.window_size
        self.norm1 = nn.LayerNorm(dim)
        self.ca = ChannelAttention(dim, cfg.squeeze_dim(dim))
        self.attn = ShadowInteractionAttention(dim, heads=cfg.heads, sigma=cfg.sigma)

    def forward(
        self,
        x: torch.Tensor,
        pooled_mask: torch.Tensor,
        return_attention: bool = False,
    ) -> Union[torch.Tensor, Tuple[torch.Tensor, torch.Tensor]]:
        b, _, h, w = x.shape
        if h % self.window_size or w % self.window_size:
            raise ShapeError(f"bottleneck {h}x{w} is not divisible by window size {self.window_size}")
        if tuple(pooled_mask.shape[-2:]) != (h, w):
            raise ShapeError(f"pooled mask {tuple(pooled_mask.shape[-2:])} does not match bottleneck {h}x{w}")
        if pooled_mask.dim() == 2:
            pooled_mask = pooled_mask.expand(b, h, w)

        sigma_map = window_correlation(pooled_mask, self.window_size, dtype=x.dtype)

        x = x.permute(0, 2, 3, 1)
        windows = window_partition(self.ca(self.norm1(x)), self.window_size)
        windows, attn = self.attn(windows, sigma_map, return_attention=True)
        x = window_reverse(windows, self.window_size, h, w) + x
        out = self.feed_forward(x).permute(0, 3, 1, 2)

        if return_attention:
            return out, attn
        return out


def make_block(kind: str, dim: int, cfg: ModelConfig) -> nn.Module:
    blocks = {"ca": CABlock, "sa": SABlock, "sia": SIMBlock}
    try:
        return blocks[kind](dim, cfg)
    except KeyError:
        raise ValueError(f"unknown block kind {kind!r}") from None
