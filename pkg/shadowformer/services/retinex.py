# shadowformer/services/retinex.py

"""Retinex shadow model: I_s = I_m * L_s * R + (1 - I_m) * L_ns * R, I_sf = L_sf * R."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import cv2
import numpy as np
import torch
from PIL import Image, ImageDraw

from shadowformer.exceptions import ShapeError
from shadowformer.schemas.dataset import ManifestEntry
from shadowformer.services.imaging import ImageTensor, PathLike, ShadowMask, save_image
from shadowformer.utils.convert import to_float, to_int

logger = logging.getLogger(__name__)

MIN_SCENE_SIZE = 16
COVERAGE_RANGE = (0.10, 0.50)
ALPHA_RANGE = (0.2, 0.7)
ILLUM_RANGE = (0.8, 1.0)
REFLECTANCE_RANGE = (0.05, 0.95)
MAX_MASK_ATTEMPTS = 200

SPLIT_DIRS = {"shadow": "{split}_A", "mask": "{split}_B", "shadow_free": "{split}_C"}


@dataclass(frozen=True)
class RetinexScene:
    reflectance: torch.Tensor       # R, (3, H, W) in [0, 1]
    illum_shadow: torch.Tensor      # L_s, (3, H, W) in (0, 1]
    illum_nonshadow: torch.Tensor   # L_ns, (3, H, W) in (0, 1]
    mask: ShadowMask                # I_m, (H, W) binary
    matte: Optional[torch.Tensor] = None   # soft penumbra used instead of `mask` when feathered
    shadow_free_gain: float = 1.0           # L_sf = gain * L_ns
    alpha: Optional[torch.Tensor] = None    # per-channel attenuation, (3,)

    @property
    def coverage(self) -> float:
        return float(self.mask.mean())


# =============================================================================
# COMPOSITION
# =============================================================================

def compose_shadow(scene: RetinexScene) -> Tuple[ImageTensor, ImageTensor]:
    """Return (shadow, shadow_free), both clamped to [0, 1]."""

    r, l_s, l_ns = scene.reflectance, scene.illum_shadow, scene.illum_nonshadow
    if r.dim() != 3 or r.shape[0] != 3:
        raise ShapeError(f"reflectance must be (3, H, W), got {tuple(r.shape)}")
    if l_s.shape != r.shape or l_ns.shape != r.shape:
        raise ShapeError(
            f"illumination {tuple(l_s.shape)} / {tuple(l_ns.shape)} does not match reflectance {tuple(r.shape)}"
        )
    if tuple(scene.mask.shape) != tuple(r.shape[1:]):
        raise ShapeError(f"mask {tuple(scene.mask.shape)} does not match reflectance {tuple(r.shape[1:])}")

    m = scene.matte if scene.matte is not None else scene.mask
    m = m.to(r.dtype).unsqueeze(0)
    shadow = m * l_s * r + (1.0 - m) * l_ns * r
    shadow_free = scene.shadow_free_gain * l_ns * r
    return shadow.clamp(0.0, 1.0), shadow_free.clamp(0.0, 1.0)


# =============================================================================
# SCENE SAMPLING
# =============================================================================

def _smooth_field(rng: np.random.Generator, h: int, w: int, channels: int, cells: int) -> np.ndarray:
    """Low-frequency random field in [0, 1], (channels, h, w)."""

    coarse = rng.uniform(0.0, 1.0, size=(cells, cells, channels)).astype(np.float32)
    fine = cv2.resize(coarse, (w, h), interpolation=cv2.INTER_CUBIC)
    if fine.ndim == 2:
        fine = fine[:, :, None]
    return np.clip(fine.transpose(2, 0, 1).astype(np.float64), 0.0, 1.0)


def _ellipse_points(rng: np.random.Generator, cx: float, cy: float, rx: float, ry: float, n: int) -> List[Tuple[float, float]]:
    # points on an ellipse in angular order form a convex polygon
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n))
    return [(cx + rx * np.cos(a), cy + ry * np.sin(a)) for a in angles]


def _draw_shape(draw: ImageDraw.ImageDraw, rng: np.random.Generator, h: int, w: int, fill) -> None:
    cx, cy = rng.uniform(0.15 * w, 0.85 * w), rng.uniform(0.15 * h, 0.85 * h)
    rx, ry = rng.uniform(0.12, 0.40) * w, rng.uniform(0.12, 0.40) * h
    if rng.uniform() < 0.5:
        draw.ellipse([cx - rx, cy - ry, cx + rx, cy + ry], fill=fill)
    else:
        draw.polygon(_ellipse_points(rng, cx, cy, rx, ry, int(rng.integers(3, 8))), fill=fill)


def _sample_mask(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    low, high = COVERAGE_RANGE
    for _ in range(MAX_MASK_ATTEMPTS):
        canvas = Image.new("L", (w, h), 0)
        draw = ImageDraw.Draw(canvas)
        for _ in range(int(rng.integers(1, 4))):
            _draw_shape(draw, rng, h, w, fill=1)
        mask = (np.asarray(canvas) > 0).astype(np.float64)
        if low <= mask.mean() <= high:
            return mask

    logger.debug("mask rejection sampling exhausted for %dx%d, using centered rectangle", h, w)
    mask = np.zeros((h, w), dtype=np.float64)
    mask[h // 4: h // 4 + h // 2, w // 4: w // 4 + w // 2] = 1.0
    return mask


def _sample_reflectance(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    base = _smooth_field(rng, h, w, channels=3, cells=4)

    canvas = Image.new("RGB", (w, h), (0, 0, 0))
    coverage = Image.new("L", (w, h), 0)
    draw, draw_cov = ImageDraw.Draw(canvas), ImageDraw.Draw(coverage)
    for _ in range(int(rng.integers(3, 9))):
        color = tuple(int(c) for c in rng.integers(30, 256, size=3))
        state = rng.bit_generator.state
        _draw_shape(draw, rng, h, w, fill=color)
        rng.bit_generator.state = state
        _draw_shape(draw_cov, rng, h, w, fill=255)

    texture = np.asarray(canvas, dtype=np.float64).transpose(2, 0, 1) / 255.0
    painted = (np.asarray(coverage, dtype=np.float64) / 255.0)[None]
    reflectance = (1.0 - 0.6 * painted) * base + 0.6 * painted * texture
    low, high = REFLECTANCE_RANGE
    return low + (high - low) * np.clip(reflectance, 0.0, 1.0)


def sample_scene(h: int, w: int, rng_seed: int, feather: int = 0, illum_jitter: float = 0.0) -> RetinexScene:
    """Deterministic random scene: textured reflectance, 1-3 convex shadow shapes, smooth light."""

    if h < MIN_SCENE_SIZE or w < MIN_SCENE_SIZE:
        raise ValueError(f"scene size must be at least {MIN_SCENE_SIZE}x{MIN_SCENE_SIZE}, got {h}x{w}")
    if feather < 0:
        raise ValueError(f"feather width must be non-negative, got {feather}")

    rng = np.random.default_rng(rng_seed)
    reflectance = _sample_reflectance(rng, h, w)
    mask = _sample_mask(rng, h, w)

    lo, hi = ILLUM_RANGE
    illum_ns = lo + (hi - lo) * _smooth_field(rng, h, w, channels=3, cells=3)
    alpha = rng.uniform(*ALPHA_RANGE, size=3)
    illum_s = alpha[:, None, None] * illum_ns

    matte = None
    if feather > 0:
        ksize = 2 * feather + 1
        soft = cv2.GaussianBlur(mask.astype(np.float32), (ksize, ksize), sigmaX=feather / 2.0)
        matte = torch.from_numpy(np.clip(soft, 0.0, 1.0).astype(np.float64))

    gain = 1.0
    if illum_jitter > 0:
        gain = float(1.0 + rng.uniform(-illum_jitter, illum_jitter))

    return RetinexScene(
        reflectance=torch.from_numpy(reflectance),
        illum_shadow=torch.from_numpy(illum_s),
        illum_nonshadow=torch.from_numpy(illum_ns),
        mask=torch.from_numpy(mask),
        matte=matte,
        shadow_free_gain=gain,
        alpha=torch.from_numpy(alpha),
    )


# =============================================================================
# DATASET GENERATION
# =============================================================================

def split_dirs(out_dir: Path, split: str) -> dict:
    return {kind: out_dir / pattern.format(split=split) for kind, pattern in SPLIT_DIRS.items()}


def manifest_path(out_dir: Path, split: str) -> Path:
    return out_dir / f"manifest_{split}.txt"


def _write_triplet(dirs: dict, index: int, seed: int, h: int, w: int, feather: int, illum_jitter: float) -> ManifestEntry:
    scene = sample_scene(h, w, seed, feather=feather, illum_jitter=illum_jitter)
    shadow, shadow_free = compose_shadow(scene)
    name = f"{index:05d}.png"
    save_image(shadow, dirs["shadow"] / name)
    save_image(scene.mask, dirs["mask"] / name)
    save_image(shadow_free, dirs["shadow_free"] / name)
    return ManifestEntry(index=index, seed=seed, coverage=scene.coverage)


def generate_dataset(
    n: int,
    h: int,
    w: int,
    rng_seed: int,
    out_dir: PathLike,
    split: str = "train",
    feather: int = 0,
    illum_jitter: float = 0.0,
    workers: int = 1,
) -> List[ManifestEntry]:
    """Write `n` ISTD-layout triplets; item i uses seed rng_seed + i."""

    if n < 0:
        raise ValueError(f"number of triplets must be non-negative, got {n}")
    out_dir = Path(out_dir)
    dirs = split_dirs(out_dir, split)
    for directory in dirs.values():
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create {directory}: {exc}") from exc

    def job(index: int) -> ManifestEntry:
        return _write_triplet(dirs, index, rng_seed + index, h, w, feather, illum_jitter)

    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(job, range(n)))
    else:
        entries = [job(i) for i in range(n)]

    path = manifest_path(out_dir, split)
    try:
        path.write_text("".join(entry.to_line() + "\n" for entry in entries), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write manifest {path}: {exc}") from exc
    logger.info("wrote %d %s triplets to %s", n, split, out_dir)
    return entries


def read_manifest(path: PathLike) -> List[ManifestEntry]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")

    entries: List[ManifestEntry] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        index, seed = (to_int(parts[0]), to_int(parts[1])) if len(parts) == 3 else (None, None)
        coverage = to_float(parts[2]) if len(parts) == 3 else None
        if index is None or seed is None or coverage is None:
            raise ValueError(f"{path}:{lineno}: expected 'index,seed,coverage', got {line!r}")
        entries.append(ManifestEntry(index=index, seed=seed, coverage=coverage))
    return entries
