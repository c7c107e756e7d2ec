# shadowformer/models/shadowformer.py

import logging
from typing import List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from shadowformer.exceptions import ShapeError
from shadowformer.models.attention import pool_mask
from shadowformer.models.blocks import SIMBlock, make_block
from shadowformer.schemas.model_config import ModelConfig

logger = logging.getLogger(__name__)


class EncoderStage(nn.Module):
    """Two blocks, then a stride-2 4x4 conv (C -> 2C, H -> H/2). Returns (skip, downsampled)."""

    def __init__(self, dim: int, cfg: ModelConfig) -> None:
        super().__init__()
        self.blocks = nn.Sequential(*[make_block(cfg.encoder_block, dim, cfg) for _ in range(cfg.blocks_per_stage)])
        self.down = nn.Conv2d(dim, dim * 2, kernel_size=4, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h, w = x.shape[-2:]
        if h % 2 or w % 2:
            raise ShapeError(f"encoder stage needs even spatial size, got {h}x{w}")
        skip = self.blocks(x)
        return skip, self.down(skip)


class DecoderStage(nn.Module):
    """2x2 transposed conv (2C -> C), concat with the skip, 1x1 fuse back to C, two blocks."""

    def __init__(self, dim: int, cfg: ModelConfig) -> None:
        super().__init__()
        self.up = nn.ConvTranspose2d(dim * 2, dim, kernel_size=2, stride=2)
        self.fuse = nn.Conv2d(dim * 2, dim, kernel_size=1)
        self.blocks = nn.Sequential(*[make_block(cfg.encoder_block, dim, cfg) for _ in range(cfg.blocks_per_stage)])

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        up = self.up(x)
        if up.shape != skip.shape:
            raise ShapeError(f"skip {tuple(skip.shape)} does not match upsampled {tuple(up.shape)}")
        return self.blocks(self.fuse(torch.cat([up, skip], dim=1)))


class ShadowFormer(nn.Module):
    """Mask-guided U-shaped transformer predicting a residual: I^ = I_s + I_r."""

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.cfg = cfg
        c = cfg.embed_dim

        self.embed = nn.Conv2d(4 if cfg.concat_mask_input else 3, c, kernel_size=3, padding=1)
        self.encoders = nn.ModuleList([EncoderStage(cfg.stage_dim(l), cfg) for l in range(cfg.depth)])
        self.bottleneck = nn.ModuleList(
            [make_block(cfg.bottleneck_block, cfg.bottleneck_dim, cfg) for _ in range(cfg.sim_blocks)]
        )
        self.decoders = nn.ModuleList([DecoderStage(cfg.stage_dim(l), cfg) for l in reversed(range(cfg.depth))])
        self.output = nn.Conv2d(c, 3, kernel_size=3, padding=1)

        self.apply(self._init_weights)
        nn.init.zeros_(self.output.weight)
        nn.init.zeros_(self.output.bias)

    @staticmethod
    def _init_weights(m: nn.Module) -> None:
        if isinstance(m, (nn.Linear, nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.trunc_normal_(m.weight, std=0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.LayerNorm):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)

    # -------------------------------------------------------------------------

    def check_input(self, img: torch.Tensor, mask: torch.Tensor) -> None:
        if img.dim() != 4 or img.shape[1] != 3:
            raise ShapeError(f"expected image batch (B, 3, H, W), got {tuple(img.shape)}")
        if mask.dim() != 3 or mask.shape[0] != img.shape[0] or mask.shape[-2:] != img.shape[-2:]:
            raise ShapeError(f"mask {tuple(mask.shape)} does not match image batch {tuple(img.shape)}")

        multiple = self.cfg.size_multiple
        h, w = img.shape[-2:]
        if h % multiple or w % multiple:
            pad_h, pad_w = -h % multiple, -w % multiple
            raise ShapeError(
                f"input {h}x{w} is not a multiple of {multiple} (2^{self.cfg.depth} x window {self.cfg.window_size}); "
                f"pad by {pad_h} rows and {pad_w} columns"
            )

    def embed_input(self, img: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        self.check_input(img, mask)
        if self.cfg.concat_mask_input:
            img = torch.cat([img, mask.unsqueeze(1).to(img.dtype)], dim=1)
        return self.embed(img)

    def _bottleneck(self, x: torch.Tensor, pooled: torch.Tensor, attention: Optional[list] = None) -> torch.Tensor:
        for block in self.bottleneck:
            if isinstance(block, SIMBlock):
                if attention is not None:
                    x, attn = block(x, pooled, return_attention=True)
                    attention.append(attn)
                else:
                    x = block(x, pooled)
            else:
                x = block(x)
        return x

    def _run(self, img: torch.Tensor, mask: torch.Tensor, attention: Optional[list] = None) -> torch.Tensor:
        x = self.embed_input(img, mask)
        skips = []
        for stage in self.encoders:
            skip, x = stage(x)
            skips.append(skip)

        x = self._bottleneck(x, pool_mask(mask, self.cfg.depth), attention)

        for stage, skip in zip(self.decoders, reversed(skips)):
            x = stage(x, skip)
        return img + self.output(x)

    def forward(self, img: torch.Tensor, mask: torch.Tensor, clamp: bool = True) -> torch.Tensor:
        """(B, 3, H, W) + (B, H, W) -> (B, 3, H, W). Unbatched (3, H, W) + (H, W) is accepted too.

        The [0, 1] clamp only applies in eval mode; training sees the raw residual sum.
        """

        unbatched = img.dim() == 3
        if unbatched:
            img, mask = img.unsqueeze(0), mask.unsqueeze(0)

        out = self._run(img, mask)
        if clamp and not self.training:
            out = out.clamp(0.0, 1.0)
        return out.squeeze(0) if unbatched else out

    def encoder_features(self, img: torch.Tensor, mask: torch.Tensor) -> List[torch.Tensor]:
        """[X_0, ..., X_L]: X_l has 2^l * C channels at H / 2^l x W / 2^l."""

        x = self.embed_input(img, mask)
        features = [x]
        for stage in self.encoders:
            _, x = stage(x)
            features.append(x)
        return features

    def bottleneck_attention(self, img: torch.Tensor, mask: torch.Tensor) -> List[torch.Tensor]:
        """Head-averaged reweighted attention of every SIM block, each (B * nW, P*P, P*P)."""

        attention: list = []
        self._run(img, mask, attention)
        return attention


def param_count(cfg: ModelConfig) -> int:
    return count_parameters(ShadowFormer(cfg))


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


# =============================================================================
# INFERENCE ON ARBITRARY SIZES
# =============================================================================

def pad_to_multiple(x: torch.Tensor, multiple: int) -> Tuple[torch.Tensor, Tuple[int, int]]:
    """Pad the bottom/right of (..., H, W) to a multiple; reflect where possible, else replicate."""

    h, w = x.shape[-2:]
    pad_h, pad_w = -h % multiple, -w % multiple
    if pad_h == 0 and pad_w == 0:
        return x, (h, w)

    mode = "reflect" if pad_h < h and pad_w < w else "replicate"
    padded = F.pad(x.reshape(-1, 1, h, w), (0, pad_w, 0, pad_h), mode=mode)
    return padded.reshape(*x.shape[:-2], h + pad_h, w + pad_w), (h, w)


@torch.no_grad()
def infer(model: ShadowFormer, img: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Run a single (3, H, W) image of any size through the model; the result is clamped to [0, 1]."""

    was_training = model.training
    model.eval()
    try:
        multiple = model.cfg.size_multiple
        padded_img, (h, w) = pad_to_multiple(img, multiple)
        padded_mask, _ = pad_to_multiple(mask, multiple)
        if padded_img.shape[-2:] != img.shape[-2:]:
            logger.debug("padded %dx%d input to %dx%d", h, w, *padded_img.shape[-2:])
        out = model(padded_img, padded_mask, clamp=True)
        return out[..., :h, :w].contiguous()
    finally:
        model.train(was_training)


def set_sigma(model: ShadowFormer, sigma: float) -> ShadowFormer:
    """Change the correlation-map weight of a built model in place (weights are unaffected)."""

    model.cfg = ModelConfig.model_validate({**model.cfg.model_dump(), "sigma": sigma})
    for module in model.modules():
        if isinstance(module, SIMBlock):
            module.attn.sigma = sigma
    return model
