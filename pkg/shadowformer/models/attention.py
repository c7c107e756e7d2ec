# shadowformer/models/attention.py

"""Window partitioning, mask pooling, the shadow/non-shadow correlation map and
the reweighted window attention used in the bottleneck.
"""

from typing import Optional, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from shadowformer.exceptions import ShapeError


# =============================================================================
# WINDOWS
# =============================================================================

def window_partition(x: torch.Tensor, window_size: int) -> torch.Tensor:
    """(B, H, W, C) -> (B * nW, P*P, C), windows in row-major order."""

    _, h, w, _ = x.shape
    if h % window_size or w % window_size:
        raise ShapeError(f"feature map {h}x{w} is not divisible into {window_size}x{window_size} windows")
    return rearrange(x, "b (h p1) (w p2) c -> (b h w) (p1 p2) c", p1=window_size, p2=window_size)


def window_reverse(windows: torch.Tensor, window_size: int, h: int, w: int) -> torch.Tensor:
    """Inverse of `window_partition`: (B * nW, P*P, C) -> (B, H, W, C)."""

    return rearrange(
        windows,
        "(b h w) (p1 p2) c -> b (h p1) (w p2) c",
        h=h // window_size,
        w=w // window_size,
        p1=window_size,
        p2=window_size,
    )


# =============================================================================
# MASK -> CORRELATION MAP
# =============================================================================

def pool_mask(mask: torch.Tensor, levels: int) -> torch.Tensor:
    """Max-pool a (B, H, W) or (H, W) mask over 2^L x 2^L cells.

    Any shadow pixel inside a cell marks the whole patch as shadow.
    """

    factor = 2 ** levels
    h, w = mask.shape[-2:]
    if h % factor or w % factor:
        raise ShapeError(f"mask {h}x{w} is not divisible by 2^{levels}={factor}")
    if factor == 1:
        return mask.clone()

    batch = mask.reshape(-1, 1, h, w).to(torch.float32)
    pooled = F.max_pool2d(batch, kernel_size=factor, stride=factor)
    return pooled.reshape(*mask.shape[:-2], h // factor, w // factor).to(mask.dtype)


def correlation_map(m_window: torch.Tensor, dtype: Optional[torch.dtype] = None) -> torch.Tensor:
    """Sigma[i, j] = m[i] XOR m[j] for binary vectors shaped (..., N)."""

    bits = m_window > 0.5
    sigma = torch.logical_xor(bits.unsqueeze(-1), bits.unsqueeze(-2))
    return sigma.to(dtype or (m_window.dtype if m_window.is_floating_point() else torch.float32))


def window_correlation(pooled: torch.Tensor, window_size: int, dtype: Optional[torch.dtype] = None) -> torch.Tensor:
    """(B, h, w) pooled mask -> (B * nW, P*P, P*P) per-window correlation maps."""

    windows = window_partition(pooled.unsqueeze(-1), window_size).squeeze(-1)
    return correlation_map(windows, dtype=dtype)


# =============================================================================
# SHADOW-INTERACTION ATTENTION
# =============================================================================

class ShadowInteractionAttention(nn.Module):
    """Multi-head window attention whose post-softmax map is scaled by
    sigma * Sigma + (1 - sigma). Rows are not renormalized afterwards.

    Without a correlation map (or with sigma = 0) it is plain window attention.
    """

    def __init__(self, dim: int, heads: int = 1, sigma: float = 0.0) -> None:
        super().__init__()
        if dim % heads:
            raise ShapeError(f"dim {dim} is not divisible by heads={heads}")
        self.dim = dim
        self.heads = heads
        self.sigma = sigma
        self.scale = (dim // heads) ** -0.5

        self.qkv = nn.Linear(dim, dim * 3, bias=True)
        self.proj = nn.Linear(dim, dim)

    def forward(
        self,
        x: torch.Tensor,
        sigma_map: Optional[torch.Tensor] = None,
        return_attention: bool = False,
    ) -> Union[torch.Tensor, Tuple[torch.Tensor, torch.Tensor]]:
        b, n, c = x.shape
        q, k, v = rearrange(self.qkv(x), "b n (three h d) -> three b h n d", three=3, h=self.heads)

        attn = torch.softmax((q * self.scale) @ k.transpose(-2, -1), dim=-1)

        if sigma_map is not None:
            if sigma_map.dim() < 2 or sigma_map.shape[-1] != sigma_map.shape[-2]:
                raise ShapeError(f"correlation map must be square, got {tuple(sigma_map.shape)}")
            if sigma_map.shape[-1] != n:
                raise ShapeError(f"correlation map is {sigma_map.shape[-1]}x{sigma_map.shape[-1]} but window has {n} tokens")
            if sigma_map.dim() == 2:
                sigma_map = sigma_map.expand(b, n, n)
            weight = self.sigma * sigma_map.to(attn.dtype) + (1.0 - self.sigma)
            attn = attn * weight.unsqueeze(1)

        out = rearrange(attn @ v, "b h n d -> b n (h d)")
        out = self.proj(out)
        if return_attention:
            return out, attn.mean(dim=1)
        return out

    def extra_repr(self) -> str:
        return f"dim={self.dim}, heads={self.heads}, sigma={self.sigma}"
