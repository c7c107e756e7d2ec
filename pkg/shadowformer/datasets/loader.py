# shadowformer/datasets/loader.py

import math
from collections import OrderedDict
from typing import Iterator, List, Optional, Sequence, Tuple

import torch

from shadowformer.datasets.layouts import load_triplet
from shadowformer.exceptions import ShapeError
from shadowformer.schemas.dataset import TripletRecord
from shadowformer.utils.hashing import derive_seed

Batch = Tuple[torch.Tensor, torch.Tensor, torch.Tensor]
Triplet = Tuple[torch.Tensor, torch.Tensor, torch.Tensor]


def _augment(
    triplet: Triplet,
    record_id: str,
    crop: Optional[int],
    flips: bool,
    generator: torch.Generator,
) -> Triplet:
    """Same crop window and flips for shadow, mask and ground truth."""

    shadow, mask, gt = triplet
    h, w = shadow.shape[-2:]

    if crop is not None:
        if crop > h or crop > w:
            raise ValueError(f"crop {crop} is larger than image {record_id} ({h}x{w})")
        top = int(torch.randint(0, h - crop + 1, (1,), generator=generator))
        left = int(torch.randint(0, w - crop + 1, (1,), generator=generator))
        shadow = shadow[:, top: top + crop, left: left + crop]
        mask = mask[top: top + crop, left: left + crop]
        gt = gt[:, top: top + crop, left: left + crop]

    if flips:
        hflip, vflip = (torch.rand(2, generator=generator) < 0.5).tolist()
        if hflip:
            shadow, mask, gt = shadow.flip(-1), mask.flip(-1), gt.flip(-1)
        if vflip:
            shadow, mask, gt = shadow.flip(-2), mask.flip(-2), gt.flip(-2)

    return shadow, mask, gt


def _stack(items: List[Triplet], ids: List[str]) -> Batch:
    sizes = {tuple(shadow.shape[-2:]) for shadow, _, _ in items}
    if len(sizes) > 1:
        raise ShapeError(f"images in one batch differ in size ({', '.join(ids)}); set a crop size")
    shadow, mask, gt = zip(*items)
    return torch.stack(shadow), torch.stack(mask), torch.stack(gt)


class TripletCache:
    """Decoded triplets by record id, least recently used evicted first. Capacity 0 keeps nothing."""

    def __init__(self, capacity: int = 0) -> None:
        if capacity < 0:
            raise ValueError(f"cache capacity must be non-negative, got {capacity}")
        self.capacity = capacity
        self._items: "OrderedDict[str, Triplet]" = OrderedDict()

    def __len__(self) -> int:
        return len(self._items)

    def get(self, record: TripletRecord) -> Triplet:
        if self.capacity == 0:
            return load_triplet(record)
        if record.id in self._items:
            self._items.move_to_end(record.id)
            return self._items[record.id]
        triplet = load_triplet(record)
        self._items[record.id] = triplet
        if len(self._items) > self.capacity:
            self._items.popitem(last=False)
        return triplet


def iterate(
    records: Sequence[TripletRecord],
    batch_size: int,
    crop: Optional[int],
    seed: int,
    augment: bool,
    epochs: Optional[int] = None,
    start: int = 0,
    cache: Optional[TripletCache] = None,
) -> Iterator[Batch]:
    """Yield (shadow (B,3,h,w), mask (B,h,w), gt (B,3,h,w)) batches.

    Epoch e is a permutation seeded from (seed, e) and batch j of it draws its
    crops and flips from (seed, e, j), so batch number `start` onwards can be
    produced without touching the batches before it. The last batch of an
    epoch may be short. `epochs=None` iterates forever.
    """

    if not records:
        raise ValueError("cannot iterate an empty dataset")
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    if start < 0:
        raise ValueError(f"start batch must be non-negative, got {start}")

    if cache is None:
        cache = TripletCache()
    per_epoch = math.ceil(len(records) / batch_size)
    epoch, first = divmod(start, per_epoch)

    while epochs is None or epoch < epochs:
        order_gen = torch.Generator().manual_seed(derive_seed(seed, f"epoch:{epoch}"))
        order = torch.randperm(len(records), generator=order_gen).tolist()
        for index in range(first, per_epoch):
            chunk = [records[i] for i in order[index * batch_size: (index + 1) * batch_size]]
            generator = torch.Generator().manual_seed(derive_seed(seed, f"batch:{epoch}:{index}"))
            items = [_augment(cache.get(record), record.id, crop, augment, generator) for record in chunk]
            yield _stack(items, [r.id for r in chunk])
        first = 0
        epoch += 1
