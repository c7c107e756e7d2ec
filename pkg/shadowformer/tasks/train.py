# shadowformer/tasks/train.py

import logging
import math
from collections import abc
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from shadowformer.config import dataset_spec
from shadowformer.datasets.layouts import scan
from shadowformer.datasets.loader import Batch, TripletCache, iterate
from shadowformer.exceptions import ShapeError, TrainingError
from shadowformer.models.shadowformer import ShadowFormer, count_parameters, param_count
from shadowformer.schemas.dataset import TripletRecord
from shadowformer.schemas.model_config import ModelConfig
from shadowformer.schemas.run_config import RunConfig
from shadowformer.schemas.train_config import HistoryRow, TrainConfig
from shadowformer.services.checkpoint import Checkpoint, load_checkpoint, restore_rng_state, save_checkpoint
from shadowformer.utils.hashing import derive_seed
from shadowformer.utils.logging import log_info, log_success

logger = logging.getLogger(__name__)

HISTORY_HEADER = "step,lr,loss"
MODEL_FILE = "model.pt"
HISTORY_FILE = "loss.csv"
CHECKPOINT_DIR = "checkpoints"


# =============================================================================
# LOSS / SCHEDULE
# =============================================================================

def l1_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} and target {tuple(gt.shape)} differ in shape")
    return (pred - gt).abs().mean()


def cosine_lr(step: int, cfg: TrainConfig) -> float:
    """lr_final + (lr_init - lr_final) * (1 + cos(pi * step / total_steps)) / 2."""

    if step < 0 or step > cfg.total_steps:
        raise ValueError(f"step {step} is outside [0, {cfg.total_steps}]")
    if cfg.total_steps == 0:
        return cfg.lr_init
    progress = step / cfg.total_steps
    return cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + math.cos(math.pi * progress))


def moving_average(values: Sequence[float], window: int) -> List[float]:
    """Means of every full trailing window; a short series gives its overall mean."""

    if window < 1:
        raise ValueError(f"window must be positive, got {window}")
    if not values:
        return []
    data = np.asarray(values, dtype=np.float64)
    if len(data) < window:
        return [float(data.mean())]
    kernel = np.full(window, 1.0 / window)
    return np.convolve(data, kernel, mode="valid").tolist()


# =============================================================================
# STATE / STEP
# =============================================================================

@dataclass
class TrainState:
    model: ShadowFormer
    optimizer: torch.optim.Optimizer
    cfg: TrainConfig
    step: int = 0


@dataclass
class TrainResult:
    state: TrainState
    history: List[HistoryRow] = field(default_factory=list)
    checkpoints: List[Path] = field(default_factory=list)


def build_optimizer(model: torch.nn.Module, cfg: TrainConfig) -> torch.optim.Optimizer:
    # AdamW applies weight decay to the weights directly, outside the adaptive update
    return torch.optim.AdamW(
        model.parameters(),
        lr=cfg.lr_init,
        betas=cfg.betas,
        weight_decay=cfg.weight_decay,
    )


def init_state(model_cfg: ModelConfig, cfg: TrainConfig) -> TrainState:
    torch.manual_seed(derive_seed(cfg.seed, "model"))
    model = ShadowFormer(model_cfg)
    return TrainState(model=model, optimizer=build_optimizer(model, cfg), cfg=cfg)


def train_step(batch: Batch, state: TrainState) -> Tuple[TrainState, float]:
    """One forward / backward / AdamW update at the scheduled learning rate."""

    shadow, mask, gt = batch
    lr = cosine_lr(state.step, state.cfg)
    for group in state.optimizer.param_groups:
        group["lr"] = lr

    state.model.train()
    pred = state.model(shadow, mask)  # no clamp in training mode
    loss = l1_loss(pred, gt)
    value = float(loss.detach())
    if not math.isfinite(value):
        raise TrainingError(state.step, f"non-finite loss {value}")

    state.optimizer.zero_grad(set_to_none=True)
    loss.backward()
    if state.cfg.max_grad_norm is not None:
        torch.nn.utils.clip_grad_norm_(state.model.parameters(), state.cfg.max_grad_norm)
    state.optimizer.step()
    state.step += 1
    return state, value


# =============================================================================
# LOOP
# =============================================================================

def write_history(path: Path, history: Sequence[HistoryRow]) -> Path:
    text = HISTORY_HEADER + "\n" + "".join(row.to_csv_line() + "\n" for row in history)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write loss history {path}: {exc}") from exc
    return path


def train_loop(
    data: Union[Sequence[TripletRecord], Iterator[Batch]],
    cfg: TrainConfig,
    model_cfg: ModelConfig,
    out_dir: Optional[Path] = None,
    resume: Optional[Checkpoint] = None,
) -> TrainResult:
    """Run `cfg.total_steps` updates. Records are batched with seeded crops/flips;
    a ready-made batch iterator is used as is.

    With `resume`, weights, AdamW moments, RNG state and loss history come from
    the checkpoint and training continues at its step; record batches pick up
    at the same position of the data stream, so the run ends where an
    uninterrupted one would.
    """

    start = resume.step if resume is not None else 0
    if start > cfg.total_steps:
        raise ValueError(f"checkpoint is at step {start}, past total_steps={cfg.total_steps}")

    if isinstance(data, abc.Sequence):
        if len(data) == 0:
            raise ValueError("cannot train on an empty dataset")
        batches = iterate(
            data,
            batch_size=cfg.batch_size,
            crop=cfg.crop_size,
            seed=derive_seed(cfg.seed, "data"),
            augment=cfg.augment_flips,
            start=start,
            cache=TripletCache(cfg.cache_size),
        )
    else:
        batches = iter(data)

    state = init_state(model_cfg, cfg)
    result = TrainResult(state=state)
    if resume is not None:
        state.model.load_state_dict(resume.model_state)
        if resume.optimizer_state is not None:
            state.optimizer.load_state_dict(resume.optimizer_state)
        state.step = resume.step
        restore_rng_state(resume.rng_state)
        result.history = list(resume.history)
        log_info(f"resuming at step {start}")
    log_info(f"training {count_parameters(state.model):,} parameters for {cfg.total_steps - start} steps")

    losses: List[float] = []
    for _ in range(cfg.total_steps - start):
        try:
            batch = next(batches)
        except StopIteration:
            raise ValueError(f"data ran out after {state.step} of {cfg.total_steps} steps") from None

        lr = cosine_lr(state.step, cfg)
        state, loss = train_step(batch, state)
        losses.append(loss)
        result.history.append(HistoryRow(step=state.step, lr=lr, loss=loss))

        if state.step % cfg.log_every == 0:
            log_info(f"step {state.step}/{cfg.total_steps}  lr {lr:.3e}  loss {np.mean(losses[-cfg.log_every:]):.5f}")
        if out_dir is not None and cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
            path = out_dir / CHECKPOINT_DIR / f"step_{state.step:06d}.pt"
            result.checkpoints.append(save_checkpoint(path, state.model, state.optimizer, state.step, result.history))

    if out_dir is not None:
        final = save_checkpoint(out_dir / MODEL_FILE, state.model, state.optimizer, state.step, result.history)
        result.checkpoints.append(final)
        write_history(out_dir / HISTORY_FILE, result.history)

    if losses:
        log_success(f"finished {state.step} steps, final loss {losses[-1]:.5f}")
    return result


def run_train(cfg: RunConfig, resume: Optional[Path] = None) -> TrainResult:
    records = scan(dataset_spec(cfg, "train"))
    log_info(f"{cfg.variant} model: {param_count(cfg.model):,} trainable parameters, {len(records)} training triplets")
    checkpoint = load_checkpoint(resume, expected=cfg.model) if resume is not None else None
    return train_loop(records, cfg.train, cfg.model, cfg.out, resume=checkpoint)
