# tests/test_acceptance.py

import numpy as np
import pytest

from shadowformer.datasets.layouts import load_triplet, scan
from shadowformer.schemas.dataset import DatasetSpec
from shadowformer.schemas.model_config import MODEL_PRESETS
from shadowformer.schemas.train_config import TrainConfig
from shadowformer.services.metrics import psnr_region
from shadowformer.services.retinex import generate_dataset
from shadowformer.models.shadowformer import infer
from shadowformer.tasks.train import moving_average, train_loop


@pytest.mark.slow
def test_toy_model_learns_to_remove_shadows(tmp_path):
    root = tmp_path / "data"
    generate_dataset(256, 64, 64, rng_seed=0, out_dir=root, split="train")
    generate_dataset(32, 64, 64, rng_seed=256, out_dir=root, split="test")

    train = scan(DatasetSpec(root=root, layout="synthetic", split="train"))
    cfg = TrainConfig(total_steps=2000, batch_size=4, crop_size=64, seed=0)
    result = train_loop(train, cfg, MODEL_PRESETS["toy"])

    losses = [row.loss for row in result.history]
    first, last = np.mean(losses[:100]), moving_average(losses, 100)[-1]
    assert last < 0.5 * first

    gains = []
    for record in scan(DatasetSpec(root=root, layout="synthetic", split="test")):
        shadow, mask, gt = load_triplet(record)
        output = infer(result.state.model, shadow, mask)
        gains.append(psnr_region(output, gt, mask) - psnr_region(shadow, gt, mask))
    assert np.mean(gains) >= 6.0
