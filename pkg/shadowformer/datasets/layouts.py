# shadowformer/datasets/layouts.py

import logging
from pathlib import Path
from typing import Dict, List, Tuple

import torch

from shadowformer.exceptions import LayoutError, ShapeError
from shadowformer.schemas.dataset import DatasetSpec, TripletRecord
from shadowformer.services.imaging import (
    ImageTensor,
    ShadowMask,
    SUPPORTED_SUFFIXES,
    binarize_mask,
    check_image,
    load_image,
    resize_bilinear,
)

logger = logging.getLogger(__name__)


# =============================================================================
# CONFIGURATION
# =============================================================================

# ISTD, ISTD+ and the synthetic generator share one layout
ISTD_DIRS = ("{split}_A", "{split}_B", "{split}_C")

# SRD: {root}/{split}/shadow, {root}/{split}/shadow_free, masks from a separate tree
SRD_SHADOW_DIR = "shadow"
SRD_FREE_DIR = "shadow_free"
SRD_MASK_DIR = "mask"
SRD_FREE_SUFFIXES = ("_no_shadow", "_free")


# =============================================================================
# DIRECTORY HELPERS
# =============================================================================

def _strip_suffix(stem: str, suffixes: Tuple[str, ...]) -> str:
    lowered = stem.lower()
    for suffix in suffixes:
        if lowered.endswith(suffix) and len(stem) > len(suffix):
            return stem[: -len(suffix)]
    return stem


def _index_images(directory: Path, strip: Tuple[str, ...] = ()) -> Dict[str, Path]:
    """Case-insensitive stem -> path for every image in `directory`."""

    index: Dict[str, Path] = {}
    clashes: List[str] = []
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.suffix.lower() not in SUPPORTED_SUFFIXES:
            continue
        key = _strip_suffix(path.stem, strip).lower()
        if key in index:
            clashes.append(path.name)
            continue
        index[key] = path
    if clashes:
        raise LayoutError(f"duplicate image stems in {directory}", clashes)
    return index


def layout_dirs(spec: DatasetSpec) -> Tuple[Path, Path, Path]:
    """(shadow, mask, shadow-free) directories for a dataset spec."""

    root = Path(spec.root)
    if spec.layout == "srd":
        split_root = root / spec.split
        mask_dir = Path(spec.mask_root) if spec.mask_root else split_root / SRD_MASK_DIR
        return split_root / SRD_SHADOW_DIR, mask_dir, split_root / SRD_FREE_DIR

    shadow, mask, free = (root / pattern.format(split=spec.split) for pattern in ISTD_DIRS)
    if spec.mask_root:
        mask = Path(spec.mask_root)
    return shadow, mask, free


# =============================================================================
# SCAN / LOAD
# =============================================================================

def scan(spec: DatasetSpec) -> List[TripletRecord]:
    """Pair shadow / mask / shadow-free files by stem; records come back sorted by id."""

    root = Path(spec.root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")

    shadow_dir, mask_dir, free_dir = layout_dirs(spec)
    missing_dirs = [str(d) for d in (shadow_dir, mask_dir, free_dir) if not d.is_dir()]
    if missing_dirs:
        raise LayoutError(f"{spec.layout} layout is missing directories", missing_dirs)

    strip = SRD_FREE_SUFFIXES if spec.layout == "srd" else ()
    shadows = _index_images(shadow_dir)
    masks = _index_images(mask_dir)
    frees = _index_images(free_dir, strip=strip)

    problems: List[str] = []
    for key in sorted(set(shadows) | set(masks) | set(frees)):
        absent = [
            kind
            for kind, index in (("shadow", shadows), ("mask", masks), ("shadow-free", frees))
            if key not in index
        ]
        if absent:
            problems.append(f"{key} (no {'/'.join(absent)})")
    if problems:
        raise LayoutError(f"unmatched stems under {root}", problems)

    records = [
        TripletRecord(
            id=shadows[key].stem,
            shadow_path=shadows[key],
            mask_path=masks[key],
            shadowfree_path=frees[key],
            layout=spec.layout,
        )
        for key in shadows
    ]
    if not records:
        raise LayoutError(f"no {spec.layout} {spec.split} triplets found under {root}")

    records.sort(key=lambda r: r.id)
    logger.debug("scanned %d %s triplets under %s", len(records), spec.split, root)
    return records


def _as_rgb(img: ImageTensor) -> ImageTensor:
    return img.expand(3, -1, -1).clone() if img.shape[0] == 1 else img


def load_triplet(record: TripletRecord) -> Tuple[ImageTensor, ShadowMask, ImageTensor]:
    """(shadow, mask, shadow-free). SRD masks are nearest-resized to the image size."""

    shadow = _as_rgb(load_image(record.shadow_path))
    gt = _as_rgb(load_image(record.shadowfree_path))
    mask = binarize_mask(load_image(record.mask_path))
    check_image(shadow, channels=(3,))

    h, w = shadow.shape[-2:]
    if tuple(gt.shape[-2:]) != (h, w):
        raise ShapeError(f"{record.id}: shadow-free image {tuple(gt.shape[-2:])} does not match shadow image {(h, w)}")
    if tuple(mask.shape) != (h, w):
        if record.layout != "srd":
            raise ShapeError(f"{record.id}: mask {tuple(mask.shape)} does not match image {(h, w)}")
        logger.debug("%s: resizing mask %s to %dx%d", record.id, tuple(mask.shape), h, w)
        mask = resize_bilinear(mask, h, w, nearest=True)

    return shadow, mask.to(torch.float32), gt
