import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import torch


def _normalize_for_hash(value: Any) -> Any:
    """Reduce config payloads to JSON-stable values: paths as posix text, tuples as lists, floats by repr."""

    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Mapping):
        return {str(k): _normalize_for_hash(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize_for_hash(v) for v in value]
    return value


def compute_payload_hash(payload: Any) -> str:
    """sha256 of the canonical JSON form of `payload` (key order does not matter)."""

    text = json.dumps(_normalize_for_hash(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def compute_state_digest(state: Mapping[str, torch.Tensor]) -> str:
    """sha256 over names, dtypes, shapes and raw bytes of a state dict, in key order."""

    digest = hashlib.sha256()
    for name in sorted(state):
        tensor = state[name].detach().cpu().contiguous()
        digest.update(name.encode("utf-8"))
        digest.update(str(tensor.dtype).encode("utf-8"))
        digest.update(str(tuple(tensor.shape)).encode("utf-8"))
        digest.update(tensor.numpy().tobytes())
    return digest.hexdigest()


def derive_seed(seed: int, component: str) -> int:
    """Stable per-component seed derived from the run seed."""

    text = f"{seed}:{component}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(text).digest()[:4], "big")
