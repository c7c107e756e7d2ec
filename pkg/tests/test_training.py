# tests/test_training.py

import math

import pytest
import torch
import torch.nn as nn

from shadowformer.datasets.layouts import scan
from shadowformer.exceptions import ShapeError, TrainingError
from shadowformer.schemas.dataset import DatasetSpec
from shadowformer.schemas.model_config import MODEL_PRESETS
from shadowformer.schemas.train_config import TrainConfig
from shadowformer.services.checkpoint import load_checkpoint
from shadowformer.tasks.train import (
    HISTORY_HEADER,
    build_optimizer,
    cosine_lr,
    init_state,
    l1_loss,
    moving_average,
    train_loop,
    train_step,
)
from shadowformer.utils.hashing import compute_state_digest

GRADCHECK = MODEL_PRESETS["gradcheck"]


def _batch(b=2, size=8):
    shadow = torch.rand(b, 3, size, size)
    mask = torch.zeros(b, size, size)
    mask[:, :4, :4] = 1.0
    return shadow, mask, torch.rand(b, 3, size, size)


class TestLossAndSchedule:
    def test_l1(self):
        pred = torch.tensor([[0.0, 0.5], [1.0, 0.25]])
        gt = torch.tensor([[1.0, 0.5], [0.0, 0.0]])
        assert float(l1_loss(pred, gt)) == pytest.approx((1.0 + 0.0 + 1.0 + 0.25) / 4)

    def test_l1_shape_mismatch(self):
        with pytest.raises(ShapeError):
            l1_loss(torch.zeros(2, 3), torch.zeros(3, 2))

    def test_cosine_endpoints(self):
        cfg = TrainConfig(lr_init=2e-4, lr_final=1e-6, total_steps=100)
        assert cosine_lr(0, cfg) == pytest.approx(2e-4)
        assert cosine_lr(100, cfg) == pytest.approx(1e-6)
        assert cosine_lr(50, cfg) == pytest.approx((2e-4 + 1e-6) / 2)

    def test_cosine_is_monotone(self):
        cfg = TrainConfig(total_steps=20)
        lrs = [cosine_lr(s, cfg) for s in range(21)]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))

    def test_cosine_out_of_range(self):
        with pytest.raises(ValueError):
            cosine_lr(11, TrainConfig(total_steps=10))

    def test_moving_average(self):
        assert moving_average([1.0, 2.0, 3.0, 4.0], 2) == pytest.approx([1.5, 2.5, 3.5])
        assert moving_average([2.0, 4.0], 5) == pytest.approx([3.0])
        assert moving_average([], 3) == []


class TestOptimizer:
    def test_adamw_single_step_by_hand(self):
        cfg = TrainConfig(lr_init=0.1, lr_final=0.0, weight_decay=0.5, betas=(0.9, 0.999))
        layer = nn.Linear(2, 1, bias=False)
        with torch.no_grad():
            layer.weight.copy_(torch.tensor([[1.0, -2.0]]))
        optimizer = build_optimizer(layer, cfg)

        grad = torch.tensor([[0.3, -0.4]])
        layer.weight.grad = grad.clone()
        optimizer.step()

        # first step: bias-corrected moments are g and g^2
        p0 = torch.tensor([[1.0, -2.0]])
        expected = p0 * (1 - 0.1 * 0.5) - 0.1 * grad / (grad.abs() + 1e-8)
        torch.testing.assert_close(layer.weight.detach(), expected, atol=1e-6, rtol=0)

    def test_zero_learning_rate_changes_nothing(self):
        cfg = TrainConfig(lr_init=0.0, lr_final=0.0, total_steps=1)
        state = init_state(GRADCHECK, cfg)
        before = {k: v.clone() for k, v in state.model.state_dict().items()}
        state, loss = train_step(_batch(), state)
        assert state.step == 1
        assert math.isfinite(loss)
        for name, value in state.model.state_dict().items():
            assert torch.equal(value, before[name]), name

    def test_step_moves_weights(self):
        state = init_state(GRADCHECK, TrainConfig(total_steps=1))
        before = state.model.output.weight.detach().clone()
        train_step(_batch(), state)
        assert not torch.equal(state.model.output.weight.detach(), before)

    def test_non_finite_loss(self):
        state = init_state(GRADCHECK, TrainConfig(total_steps=1))
        shadow, mask, gt = _batch()
        shadow[0, 0, 0, 0] = float("nan")
        with pytest.raises(TrainingError):
            train_step((shadow, mask, gt), state)

    def test_gradient_clipping(self):
        cfg = TrainConfig(total_steps=1, max_grad_norm=1e-3)
        state = init_state(GRADCHECK, cfg)
        train_step(_batch(), state)
        norm = torch.sqrt(sum(p.grad.pow(2).sum() for p in state.model.parameters() if p.grad is not None))
        assert float(norm) <= 1e-3 * (1 + 1e-4)


class TestTrainLoop:
    def test_same_seed_same_run(self, synthetic_root):
        records = scan(DatasetSpec(root=synthetic_root, layout="synthetic"))
        cfg = TrainConfig(total_steps=3, batch_size=2, crop_size=16, seed=5)
        first = train_loop(records, cfg, GRADCHECK)
        second = train_loop(records, cfg, GRADCHECK)
        assert [r.loss for r in first.history] == [r.loss for r in second.history]
        assert compute_state_digest(first.state.model.state_dict()) == compute_state_digest(
            second.state.model.state_dict()
        )

    def test_history_rows(self, synthetic_root):
        records = scan(DatasetSpec(root=synthetic_root, layout="synthetic"))
        cfg = TrainConfig(total_steps=4, batch_size=3, crop_size=16, lr_init=1e-3, lr_final=1e-5)
        result = train_loop(records, cfg, GRADCHECK)
        assert [r.step for r in result.history] == [1, 2, 3, 4]
        assert [r.lr for r in result.history] == pytest.approx([cosine_lr(s, cfg) for s in range(4)])

    def test_zero_steps_writes_the_initial_model(self, synthetic_root, tmp_path):
        records = scan(DatasetSpec(root=synthetic_root, layout="synthetic"))
        cfg = TrainConfig(total_steps=0, crop_size=16, seed=2)
        result = train_loop(records, cfg, GRADCHECK, out_dir=tmp_path)

        assert result.history == []
        assert (tmp_path / "loss.csv").read_text() == HISTORY_HEADER + "\n"
        checkpoint = load_checkpoint(tmp_path / "model.pt", expected=GRADCHECK)
        assert checkpoint.step == 0
        assert checkpoint.digest == compute_state_digest(init_state(GRADCHECK, cfg).model.state_dict())

    def test_periodic_checkpoints(self, synthetic_root, tmp_path):
        records = scan(DatasetSpec(root=synthetic_root, layout="synthetic"))
        cfg = TrainConfig(total_steps=4, crop_size=16, checkpoint_every=2)
        result = train_loop(records, cfg, GRADCHECK, out_dir=tmp_path)
        names = [p.name for p in result.checkpoints]
        assert names == ["step_000002.pt", "step_000004.pt", "model.pt"]
        assert len((tmp_path / "loss.csv").read_text().splitlines()) == 5

    def test_resume_ends_where_an_uninterrupted_run_ends(self, synthetic_root, tmp_path):
        records = scan(DatasetSpec(root=synthetic_root, layout="synthetic"))
        cfg = TrainConfig(total_steps=4, batch_size=3, crop_size=16, checkpoint_every=2, seed=7)
        train_loop(records, cfg, GRADCHECK, out_dir=tmp_path / "straight")

        halfway = load_checkpoint(tmp_path / "straight" / "checkpoints" / "step_000002.pt", expected=GRADCHECK)
        assert [r.step for r in halfway.history] == [1, 2]
        resumed = train_loop(records, cfg, GRADCHECK, out_dir=tmp_path / "resumed", resume=halfway)

        assert [r.step for r in resumed.history] == [1, 2, 3, 4]
        straight_model = load_checkpoint(tmp_path / "straight" / "model.pt")
        resumed_model = load_checkpoint(tmp_path / "resumed" / "model.pt")
        assert resumed_model.digest == straight_model.digest
        assert (tmp_path / "resumed" / "loss.csv").read_bytes() == (tmp_path / "straight" / "loss.csv").read_bytes()

    def test_resume_past_the_budget(self, synthetic_root, tmp_path):
        records = scan(DatasetSpec(root=synthetic_root, layout="synthetic"))
        train_loop(records, TrainConfig(total_steps=2, crop_size=16), GRADCHECK, out_dir=tmp_path)
        checkpoint = load_checkpoint(tmp_path / "model.pt")
        with pytest.raises(ValueError, match="past total_steps"):
            train_loop(records, TrainConfig(total_steps=1, crop_size=16), GRADCHECK, resume=checkpoint)

    def test_batch_iterator_running_out(self):
        with pytest.raises(ValueError, match="ran out"):
            train_loop(iter([_batch()]), TrainConfig(total_steps=2), GRADCHECK)

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            train_loop([], TrainConfig(total_steps=1), GRADCHECK)
