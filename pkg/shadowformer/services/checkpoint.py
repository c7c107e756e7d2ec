# shadowformer/services/checkpoint.py

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import ValidationError

from shadowformer.exceptions import CheckpointError
from shadowformer.models.shadowformer import ShadowFormer, count_parameters
from shadowformer.schemas.model_config import ModelConfig
from shadowformer.schemas.train_config import HistoryRow
from shadowformer.services.imaging import PathLike
from shadowformer.utils.hashing import compute_payload_hash, compute_state_digest

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "shadowformer-checkpoint-1"
MANIFEST_SUFFIX = ".manifest"


@dataclass
class Checkpoint:
    config: ModelConfig
    model_state: Dict[str, torch.Tensor]
    optimizer_state: Optional[Dict[str, Any]]
    step: int
    rng_state: Dict[str, Any]
    digest: str
    history: List[HistoryRow] = field(default_factory=list)


def manifest_path(path: PathLike) -> Path:
    return Path(path).with_suffix(MANIFEST_SUFFIX)


def _rng_state() -> Dict[str, Any]:
    _, keys, pos, has_gauss, cached = np.random.get_state()
    return {
        "torch": torch.get_rng_state(),
        "numpy_keys": torch.from_numpy(keys.astype(np.int64)),
        "numpy_pos": int(pos),
        "numpy_has_gauss": int(has_gauss),
        "numpy_cached_gaussian": float(cached),
    }


def restore_rng_state(state: Dict[str, Any]) -> None:
    torch.set_rng_state(state["torch"])
    np.random.set_state(
        (
            "MT19937",
            state["numpy_keys"].numpy().astype(np.uint32),
            state["numpy_pos"],
            state["numpy_has_gauss"],
            state["numpy_cached_gaussian"],
        )
    )


# =============================================================================
# MANIFEST
# =============================================================================

def render_manifest(config: ModelConfig, n_params: int, step: int, digest: str) -> str:
    lines = [
        f"format = {CHECKPOINT_FORMAT}",
        f"step = {step}",
        f"param_count = {n_params}",
        f"weights_sha256 = {digest}",
        f"config_sha256 = {compute_payload_hash(config.model_dump())}",
    ]
    lines += [f"{key} = {value}" for key, value in config.model_dump().items()]
    return "\n".join(lines) + "\n"


def read_manifest(path: PathLike) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint manifest not found: {path}")

    entries: Dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"{path}:{lineno}: expected 'key = value'")
        entries[key.strip()] = value.strip()
    return entries


def _config_from_manifest(entries: Dict[str, str], path: Path) -> ModelConfig:
    fields = {k: v for k, v in entries.items() if k in ModelConfig.model_fields}
    try:
        return ModelConfig.model_validate(fields)
    except ValidationError as exc:
        raise CheckpointError(f"{path}: invalid model config in manifest: {exc.errors()[0]['msg']}") from exc


# =============================================================================
# SAVE / LOAD
# =============================================================================

def save_checkpoint(
    path: PathLike,
    model: ShadowFormer,
    optimizer: Optional[torch.optim.Optimizer] = None,
    step: int = 0,
    history: Sequence[HistoryRow] = (),
) -> Path:
    """Write the weight blob at `path` and its `.manifest` sidecar. `history` is the loss log up to `step`."""

    path = Path(path)
    state = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()}
    digest = compute_state_digest(state)
    blob = {
        "format": CHECKPOINT_FORMAT,
        "config": model.cfg.model_dump(),
        "model": state,
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "step": step,
        "rng": _rng_state(),
        "history": [[row.step, row.lr, row.loss] for row in history],
    }

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(blob, path)
        manifest_path(path).write_text(
            render_manifest(model.cfg, count_parameters(model), step, digest), encoding="utf-8"
        )
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc

    logger.debug("saved checkpoint %s (step %d, sha256 %s)", path, step, digest[:12])
    return path


def load_checkpoint(path: PathLike, expected: Optional[ModelConfig] = None) -> Checkpoint:
    """Read and verify a checkpoint: manifest config, parameter count and weight digest must agree."""

    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")

    entries = read_manifest(manifest_path(path))
    if entries.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: unknown checkpoint format {entries.get('format')!r}")
    config = _config_from_manifest(entries, path)
    if entries.get("config_sha256") != compute_payload_hash(config.model_dump()):
        raise CheckpointError(f"{path}: manifest config fingerprint does not match its fields")

    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    if ModelConfig.model_validate(blob["config"]) != config:
        raise CheckpointError(f"{path}: blob config does not match its manifest")
    if expected is not None and expected != config:
        diff = sorted(k for k in ModelConfig.model_fields if getattr(expected, k) != getattr(config, k))
        raise CheckpointError(f"{path}: model config differs from the requested one in {', '.join(diff)}")

    state = blob["model"]
    digest = compute_state_digest(state)
    if digest != entries.get("weights_sha256"):
        raise CheckpointError(f"{path}: weight digest does not match the manifest")

    n_params = sum(v.numel() for k, v in state.items())
    if str(n_params) != entries.get("param_count"):
        raise CheckpointError(f"{path}: parameter count {n_params} does not match manifest {entries.get('param_count')}")

    return Checkpoint(
        config=config,
        model_state=state,
        optimizer_state=blob.get("optimizer"),
        step=int(blob["step"]),
        rng_state=blob["rng"],
        digest=digest,
        history=[HistoryRow(step=int(s), lr=float(lr), loss=float(loss)) for s, lr, loss in blob.get("history", [])],
    )


def load_model(path: PathLike, expected: Optional[ModelConfig] = None) -> Tuple[ShadowFormer, Checkpoint]:
    checkpoint = load_checkpoint(path, expected)
    model = ShadowFormer(checkpoint.config)
    model.load_state_dict(checkpoint.model_state)
    if count_parameters(model) != sum(v.numel() for v in checkpoint.model_state.values()):
        raise CheckpointError(f"{path}: parameter count does not match the model built from its config")
    model.eval()
    return model, checkpoint
