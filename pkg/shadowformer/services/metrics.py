# shadowformer/services/metrics.py

"""Region-wise PSNR / SSIM / LAB error over shadow (S), non-shadow (NS) and whole-image (ALL) pixels.

Every function takes a region selector `mask` (H, W): pixels where it is 1
are inside the region; `None` means the whole image. Everything is computed
in float64 on the 8-bit scale [0, 255] (LAB for the colour error).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch
from skimage.metrics import structural_similarity

from shadowformer.datasets.layouts import load_triplet, scan
from shadowformer.exceptions import MissingResultsError, RegionError, ShapeError
from shadowformer.schemas.dataset import DatasetSpec, TripletRecord
from shadowformer.schemas.metrics_report import REGIONS, MetricsReport, RegionMetrics, RmseConvention
from shadowformer.services.imaging import (
    ImageTensor,
    PathLike,
    ShadowMask,
    SUPPORTED_SUFFIXES,
    check_image,
    check_mask,
    load_image,
    resize_bilinear,
    srgb_to_lab,
)

logger = logging.getLogger(__name__)

DATA_RANGE = 255.0
PSNR_CAP = 99.0
EVAL_SIZE = 256

SSIM_SIGMA = 1.5
SSIM_WINDOW = 11

RegionValues = Tuple[float, float, float]  # psnr, ssim, rmse


# =============================================================================
# HELPERS
# =============================================================================

def _check_pair(a: ImageTensor, b: ImageTensor) -> None:
    check_image(a)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def _selector(mask: Optional[ShadowMask], like: ImageTensor) -> np.ndarray:
    if mask is None:
        return np.ones(tuple(like.shape[-2:]), dtype=bool)
    check_mask(mask, like)
    return mask.detach().cpu().numpy() > 0.5


def region_selector(mask: ShadowMask, region: str) -> Optional[ShadowMask]:
    """Shadow mask -> selector for region S, NS or ALL (None)."""

    if region == "S":
        return (mask > 0.5).to(torch.float32)
    if region == "NS":
        return (mask <= 0.5).to(torch.float32)
    if region == "ALL":
        return None
    raise ValueError(f"unknown region {region!r}; expected one of {', '.join(REGIONS)}")


def _to_255(img: ImageTensor) -> np.ndarray:
    return img.detach().to(torch.float64).cpu().numpy() * DATA_RANGE


# =============================================================================
# PSNR
# =============================================================================

def region_mse(a: ImageTensor, b: ImageTensor, mask: Optional[ShadowMask] = None) -> Tuple[float, int]:
    """(sum of squared errors, number of elements) over the region, all channels."""

    _check_pair(a, b)
    sel = _selector(mask, a)
    diff = _to_255(a)[:, sel] - _to_255(b)[:, sel]
    return float(np.sum(diff * diff)), int(diff.size)


def _psnr_from_mse(mse: float) -> float:
    if mse <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(DATA_RANGE ** 2 / mse))


def psnr_region(a: ImageTensor, b: ImageTensor, mask: Optional[ShadowMask] = None) -> float:
    sse, count = region_mse(a, b, mask)
    if count == 0:
        raise RegionError("PSNR region is empty")
    return _psnr_from_mse(sse / count)


# =============================================================================
# SSIM
# =============================================================================

def ssim_map(a: ImageTensor, b: ImageTensor) -> np.ndarray:
    """Single-scale SSIM map (Gaussian 11x11, sigma 1.5), averaged over channels -> (H, W)."""

    _check_pair(a, b)
    h, w = a.shape[-2:]
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")

    _, full = structural_similarity(
        _to_255(a),
        _to_255(b),
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        data_range=DATA_RANGE,
        channel_axis=0,
        full=True,
    )
    return full.mean(axis=0)


def _masked_mean(values: np.ndarray, sel: np.ndarray, what: str) -> float:
    if not sel.any():
        raise RegionError(f"{what} region is empty")
    return float(values[sel].mean())


def ssim_region(a: ImageTensor, b: ImageTensor, mask: Optional[ShadowMask] = None) -> float:
    """Mean of the full-image SSIM map over the region pixels."""

    return _masked_mean(ssim_map(a, b), _selector(mask, a), "SSIM")


# =============================================================================
# LAB ERROR
# =============================================================================

def _lab_error_map(a: ImageTensor, b: ImageTensor) -> np.ndarray:
    check_image(a, channels=(3,))
    return (srgb_to_lab(a) - srgb_to_lab(b)).numpy()


def _lab_error(delta: np.ndarray, sel: np.ndarray, convention: RmseConvention) -> float:
    if not sel.any():
        raise RegionError("LAB error region is empty")
    region = delta[:, sel]
    if convention == "mae":
        # per-pixel sum of |dL|, |da|, |db|, averaged over pixels
        return float(np.abs(region).sum(axis=0).mean())
    if convention == "rms":
        return float(np.sqrt(np.mean(region * region)))
    raise ValueError(f"unknown rmse convention {convention!r}")


def rmse_lab_region(
    a: ImageTensor,
    b: ImageTensor,
    mask: Optional[ShadowMask] = None,
    convention: RmseConvention = "mae",
) -> float:
    _check_pair(a, b)
    return _lab_error(_lab_error_map(a, b), _selector(mask, a), convention)


# =============================================================================
# PER IMAGE / AGGREGATION
# =============================================================================

def image_metrics(
    result: ImageTensor,
    gt: ImageTensor,
    mask: ShadowMask,
    convention: RmseConvention = "mae",
) -> Dict[str, Optional[RegionValues]]:
    """S / NS / ALL values for one image; a region with no pixels maps to None."""

    _check_pair(result, gt)
    check_mask(mask, result)
    ssim = ssim_map(result, gt)
    delta = _lab_error_map(result, gt)

    values: Dict[str, Optional[RegionValues]] = {}
    for region in REGIONS:
        selector = region_selector(mask, region)
        sel = _selector(selector, result)
        if not sel.any():
            values[region] = None
            continue
        sse, count = region_mse(result, gt, selector)
        values[region] = (
            _psnr_from_mse(sse / count),
            float(ssim[sel].mean()),
            _lab_error(delta, sel, convention),
        )
    return values


def aggregate(per_image: Sequence[Dict[str, Optional[RegionValues]]], convention: RmseConvention) -> MetricsReport:
    """Average per-image values region by region, skipping images where a region is empty."""

    regions: Dict[str, RegionMetrics] = {}
    for region in REGIONS:
        rows = [values[region] for values in per_image if values[region] is not None]
        if not rows:
            regions[region] = RegionMetrics(psnr=float("nan"), ssim=float("nan"), rmse=float("nan"), n_images=0)
            continue
        table = np.asarray(rows, dtype=np.float64)
        psnr, ssim, rmse = table.mean(axis=0)
        regions[region] = RegionMetrics(psnr=float(psnr), ssim=float(ssim), rmse=float(rmse), n_images=len(rows))
    return MetricsReport(regions=regions, n_images=len(per_image), convention=convention)


def _eval_size(result: ImageTensor, gt: ImageTensor, mask: ShadowMask, resolution: str):
    if resolution == "256":
        return (
            resize_bilinear(result, EVAL_SIZE, EVAL_SIZE),
            resize_bilinear(gt, EVAL_SIZE, EVAL_SIZE),
            resize_bilinear(mask, EVAL_SIZE, EVAL_SIZE, nearest=True),
        )
    if resolution != "original":
        raise ValueError(f"unknown resolution {resolution!r}; expected 256 or original")
    h, w = gt.shape[-2:]
    if tuple(result.shape[-2:]) != (h, w):
        result = resize_bilinear(result, h, w)
    return result, gt, mask


def evaluate_pairs(
    items: Iterable[Tuple[ImageTensor, ImageTensor, ShadowMask]],
    convention: RmseConvention = "mae",
    resolution: str = "256",
) -> MetricsReport:
    """Evaluate in-memory (result, gt, mask) triples."""

    per_image = [image_metrics(*_eval_size(r, g, m, resolution), convention=convention) for r, g, m in items]
    return aggregate(per_image, convention)


# =============================================================================
# DATASET EVALUATION
# =============================================================================

def find_results(results_dir: PathLike, records: Sequence[TripletRecord]) -> Dict[str, Path]:
    """Match each record id to an image in `results_dir` (case-insensitive stem)."""

    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise FileNotFoundError(f"results directory not found: {results_dir}")

    available = {
        path.stem.lower(): path
        for path in sorted(results_dir.iterdir())
        if path.is_file() and path.suffix.lower() in SUPPORTED_SUFFIXES
    }
    missing = [r.id for r in records if r.id.lower() not in available]
    if missing:
        raise MissingResultsError(missing)
    return {r.id: available[r.id.lower()] for r in records}


def evaluate_dataset(
    results_dir: PathLike,
    dataset: DatasetSpec,
    convention: RmseConvention = "mae",
    resolution: str = "256",
    workers: int = 1,
) -> MetricsReport:
    """Compare every result image against the dataset's shadow-free ground truth."""

    records = scan(dataset)
    paths = find_results(results_dir, records)

    def job(record: TripletRecord) -> Dict[str, Optional[RegionValues]]:
        _, mask, gt = load_triplet(record)
        result = load_image(paths[record.id])
        if result.shape[0] == 1:
            result = result.expand(3, -1, -1).clone()
        return image_metrics(*_eval_size(result, gt, mask, resolution), convention=convention)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_image: List = list(pool.map(job, records))
    else:
        per_image = [job(r) for r in records]

    logger.info("evaluated %d images from %s", len(records), results_dir)
    return aggregate(per_image, convention)
