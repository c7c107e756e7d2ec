# shadowformer/tasks/viz_attn.py

from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import cv2
import numpy as np
import torch

from shadowformer.exceptions import ShapeError
from shadowformer.models.shadowformer import ShadowFormer, pad_to_multiple
from shadowformer.services.imaging import ImageTensor, ShadowMask, check_mask, resize_bilinear, to_uint8
from shadowformer.utils.logging import log_success

Point = Tuple[int, int]  # (x, y) in image pixels

OVERLAY_ALPHA = 0.5


def attention_heatmap(
    attention: torch.Tensor,
    point: Point,
    image_hw: Tuple[int, int],
    padded_hw: Tuple[int, int],
    levels: int,
    window_size: int,
) -> np.ndarray:
    """Attention row of the bottleneck patch under `point`, scattered back to its
    window, normalized to [0, 1] and upsampled to the image size -> (H, W) float64.
    """

    h, w = image_hw
    x, y = point
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"key point ({x}, {y}) is outside the {w}x{h} image")

    factor = 2 ** levels
    hb, wb = padded_hw[0] // factor, padded_hw[1] // factor
    py, px = y // factor, x // factor
    wy, wx = py // window_size, px // window_size
    window = wy * (wb // window_size) + wx
    token = (py % window_size) * window_size + (px % window_size)

    if attention.dim() != 3 or attention.shape[0] <= window:
        raise ShapeError(f"attention {tuple(attention.shape)} does not cover window {window}")
    row = attention[window, token].detach().to(torch.float64).cpu()

    heat = torch.zeros(hb, wb, dtype=torch.float64)
    heat[wy * window_size: (wy + 1) * window_size, wx * window_size: (wx + 1) * window_size] = row.reshape(
        window_size, window_size
    )
    low, high = float(heat.min()), float(heat.max())
    heat = (heat - low) / (high - low) if high > low else torch.zeros_like(heat)

    full = resize_bilinear(heat, padded_hw[0], padded_hw[1])[:h, :w]
    return full.clamp(0.0, 1.0).numpy()


def overlay(image: ImageTensor, heat: np.ndarray, point: Point) -> np.ndarray:
    """JET-colored heatmap blended over the RGB image, as a BGR uint8 array."""

    base = cv2.cvtColor(to_uint8(image), cv2.COLOR_RGB2BGR)
    colored = cv2.applyColorMap(np.round(heat * 255.0).astype(np.uint8), cv2.COLORMAP_JET)
    blended = cv2.addWeighted(base, 1.0 - OVERLAY_ALPHA, colored, OVERLAY_ALPHA, 0.0)
    cv2.circle(blended, point, radius=3, color=(255, 255, 255), thickness=-1)
    return blended


@torch.no_grad()
def bottleneck_attention(model: ShadowFormer, image: ImageTensor, mask: ShadowMask) -> Tuple[List[torch.Tensor], Tuple[int, int]]:
    """Per-SIM-block attention maps for one (3, H, W) image, plus the padded size used."""

    check_mask(mask, image)
    model.eval()
    padded_img, _ = pad_to_multiple(image, model.cfg.size_multiple)
    padded_mask, _ = pad_to_multiple(mask, model.cfg.size_multiple)
    maps = model.bottleneck_attention(padded_img.unsqueeze(0), padded_mask.unsqueeze(0))
    if not maps:
        raise ValueError("model has no shadow-interaction blocks (bottleneck_block = ca)")
    return maps, tuple(padded_img.shape[-2:])


def run_viz(
    model: ShadowFormer,
    image: ImageTensor,
    mask: ShadowMask,
    points: Sequence[Point],
    out_dir: Path,
    block: int = 0,
) -> Dict[Point, Path]:
    """Write `attn_{x}_{y}.png` (overlay) and `attn_{x}_{y}_heat.png` (grayscale) per key point."""

    h, w = image.shape[-2:]
    for x, y in points:
        if not (0 <= x < w and 0 <= y < h):
            raise ValueError(f"key point ({x}, {y}) is outside the {w}x{h} image")

    maps, padded_hw = bottleneck_attention(model, image, mask)
    if not -len(maps) <= block < len(maps):
        raise ValueError(f"block {block} out of range; the bottleneck has {len(maps)} blocks")

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc}") from exc

    written: Dict[Point, Path] = {}
    for point in points:
        heat = attention_heatmap(maps[block], point, (h, w), padded_hw, model.cfg.depth, model.cfg.window_size)
        path = out_dir / f"attn_{point[0]}_{point[1]}.png"
        gray = out_dir / f"attn_{point[0]}_{point[1]}_heat.png"
        if not cv2.imwrite(str(path), overlay(image, heat, point)):
            raise OSError(f"failed to write image: {path}")
        if not cv2.imwrite(str(gray), np.round(heat * 255.0).astype(np.uint8)):
            raise OSError(f"failed to write image: {gray}")
        written[point] = path

    log_success(f"wrote {len(written)} attention heatmaps to {out_dir}")
    return written
