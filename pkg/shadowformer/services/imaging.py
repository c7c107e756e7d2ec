# shadowformer/services/imaging.py

"""Image and mask tensors, file I/O, resizing and sRGB -> CIELAB.

Images are float tensors shaped (C, H, W) with C in {1, 3} and values in
[0, 1]; masks are float tensors shaped (H, W) holding exactly 0.0 or 1.0
(1 = shadow pixel).
"""

import logging
from pathlib import Path
from typing import Union

import cv2
import numpy as np
import torch
import torch.nn.functional as F

from shadowformer.exceptions import FormatError, ShapeError

logger = logging.getLogger(__name__)

ImageTensor = torch.Tensor
ShadowMask = torch.Tensor
PathLike = Union[str, Path]

SUPPORTED_SUFFIXES = {".png", ".jpg", ".jpeg"}
JPEG_SUFFIXES = {".jpg", ".jpeg"}
DEFAULT_MASK_THRESHOLD = 0.5

# sRGB (D65, 2 degree observer)
_M_RGB2XYZ = torch.tensor(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=torch.float64,
)
_M_XYZ2RGB = torch.linalg.inv(_M_RGB2XYZ)
_WHITE_D65 = torch.tensor([0.95047, 1.00000, 1.08883], dtype=torch.float64)

_SRGB_BREAK = 0.04045
_LAB_DELTA = 6.0 / 29.0
_LAB_EPS = _LAB_DELTA ** 3


# =============================================================================
# VALIDATION
# =============================================================================

def check_image(img: ImageTensor, channels=(1, 3)) -> None:
    if img.dim() != 3 or img.shape[0] not in channels:
        raise ShapeError(f"expected image shaped (C, H, W) with C in {tuple(channels)}, got {tuple(img.shape)}")
    if img.shape[1] < 1 or img.shape[2] < 1:
        raise ShapeError(f"empty image {tuple(img.shape)}")


def check_mask(mask: ShadowMask, like: ImageTensor = None) -> None:
    if mask.dim() != 2:
        raise ShapeError(f"expected mask shaped (H, W), got {tuple(mask.shape)}")
    if like is not None and tuple(mask.shape) != tuple(like.shape[-2:]):
        raise ShapeError(f"mask {tuple(mask.shape)} does not match image {tuple(like.shape[-2:])}")


# =============================================================================
# FILE I/O
# =============================================================================

def load_image(path: PathLike) -> ImageTensor:
    """Read an 8- or 16-bit PNG/JPEG into an RGB (or single-channel) tensor in [0, 1]."""

    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    suffix = path.suffix.lower()
    if suffix not in SUPPORTED_SUFFIXES:
        raise FormatError(f"unsupported image format {suffix or '(none)'}: {path}")
    if suffix in JPEG_SUFFIXES:
        logger.warning("JPEG input is lossy, mask edges may be unreliable: %s", path)

    array = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if array is None:
        raise FormatError(f"could not decode image: {path}")

    if array.dtype == np.uint8:
        scale = 255.0
    elif array.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"unsupported bit depth {array.dtype}: {path}")

    if array.ndim == 2:
        array = array[:, :, None]
    elif array.shape[2] == 4:
        array = cv2.cvtColor(array, cv2.COLOR_BGRA2RGB)
    elif array.shape[2] == 3:
        array = cv2.cvtColor(array, cv2.COLOR_BGR2RGB)
    else:
        raise FormatError(f"unsupported channel count {array.shape[2]}: {path}")

    data = torch.from_numpy(np.ascontiguousarray(array.transpose(2, 0, 1)).astype(np.float64) / scale)
    return data.to(torch.float32)


def to_uint8(img: ImageTensor) -> np.ndarray:
    """(C, H, W) in [0, 1] -> (H, W, C) uint8 with round(v * 255) clamped to [0, 255]."""

    values = torch.round(img.detach().to(torch.float64).cpu() * 255.0).clamp(0, 255)
    return np.ascontiguousarray(values.to(torch.uint8).permute(1, 2, 0).numpy())


def save_image(img: ImageTensor, path: PathLike) -> Path:
    """Write an 8-bit PNG; masks (H, W) are written as single-channel images."""

    path = Path(path)
    if img.dim() == 2:
        img = img.unsqueeze(0)
    check_image(img)

    array = to_uint8(img)
    if array.shape[2] == 3:
        array = cv2.cvtColor(array, cv2.COLOR_RGB2BGR)
    else:
        array = array[:, :, 0]

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create directory {path.parent}: {exc}") from exc
    if not cv2.imwrite(str(path), np.ascontiguousarray(array)):
        raise OSError(f"failed to write image: {path}")
    return path


def binarize_mask(img: ImageTensor, threshold: float = DEFAULT_MASK_THRESHOLD) -> ShadowMask:
    """1 where the channel mean exceeds `threshold`, else 0. Accepts (C, H, W) or (H, W)."""

    if img.dim() == 2:
        img = img.unsqueeze(0)
    check_image(img)
    return (img.to(torch.float32).mean(dim=0) > threshold).to(torch.float32)


def load_mask(path: PathLike, threshold: float = DEFAULT_MASK_THRESHOLD) -> ShadowMask:
    return binarize_mask(load_image(path), threshold)


# =============================================================================
# COLOR
# =============================================================================

def _srgb_to_linear(rgb: torch.Tensor) -> torch.Tensor:
    return torch.where(rgb <= _SRGB_BREAK, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(rgb: torch.Tensor) -> torch.Tensor:
    rgb = rgb.clamp(min=0.0)
    return torch.where(rgb <= 0.0031308, rgb * 12.92, 1.055 * rgb ** (1.0 / 2.4) - 0.055)


def _f_lab(t: torch.Tensor) -> torch.Tensor:
    return torch.where(t > _LAB_EPS, t.clamp(min=_LAB_EPS) ** (1.0 / 3.0), t / (3 * _LAB_DELTA ** 2) + 4.0 / 29.0)


def _f_lab_inv(t: torch.Tensor) -> torch.Tensor:
    return torch.where(t > _LAB_DELTA, t ** 3, 3 * _LAB_DELTA ** 2 * (t - 4.0 / 29.0))


def srgb_to_lab(img: ImageTensor) -> torch.Tensor:
    """sRGB in [0, 1] -> CIELAB (L in [0, 100]), always computed in float64."""

    check_image(img, channels=(3,))
    rgb = _srgb_to_linear(img.detach().to(torch.float64).cpu())
    xyz = torch.einsum("ij,jhw->ihw", _M_RGB2XYZ, rgb) / _WHITE_D65[:, None, None]
    fx, fy, fz = _f_lab(xyz[0]), _f_lab(xyz[1]), _f_lab(xyz[2])
    return torch.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)])


def lab_to_srgb(lab: torch.Tensor) -> torch.Tensor:
    """Inverse of `srgb_to_lab` (float64, no clamping)."""

    lab = lab.to(torch.float64)
    fy = (lab[0] + 16.0) / 116.0
    fx = fy + lab[1] / 500.0
    fz = fy - lab[2] / 200.0
    xyz = torch.stack([_f_lab_inv(fx), _f_lab_inv(fy), _f_lab_inv(fz)]) * _WHITE_D65[:, None, None]
    return _linear_to_srgb(torch.einsum("ij,jhw->ihw", _M_XYZ2RGB, xyz))


# =============================================================================
# RESIZING
# =============================================================================

def resize_bilinear(img: torch.Tensor, h: int, w: int, nearest: bool = False) -> torch.Tensor:
    """Bilinear resize with align_corners=False; `nearest=True` is the mask path.

    Accepts (C, H, W) images or (H, W) masks. Same-size resizes return an exact copy.
    """

    if h < 1 or w < 1:
        raise ValueError(f"target size must be positive, got {h}x{w}")
    if img.dim() not in (2, 3):
        raise ShapeError(f"expected (C, H, W) or (H, W), got {tuple(img.shape)}")
    if tuple(img.shape[-2:]) == (h, w):
        return img.clone()

    batch = img.reshape(1, -1, *img.shape[-2:])
    if nearest:
        out = F.interpolate(batch, size=(h, w), mode="nearest")
    else:
        out = F.interpolate(batch, size=(h, w), mode="bilinear", align_corners=False)
    return out.reshape(*img.shape[:-2], h, w)
