# tests/test_attention.py

import math

import pytest
import torch

from shadowformer.exceptions import ShapeError
from shadowformer.models.attention import (
    ShadowInteractionAttention,
    correlation_map,
    pool_mask,
    window_correlation,
    window_partition,
    window_reverse,
)


def _vanilla(attn: ShadowInteractionAttention, x: torch.Tensor) -> torch.Tensor:
    """Plain multi-head attention written out by hand."""

    b, n, c = x.shape
    d = c // attn.heads
    qkv = attn.qkv(x).reshape(b, n, 3, attn.heads, d).permute(2, 0, 3, 1, 4)
    q, k, v = qkv[0], qkv[1], qkv[2]
    weights = torch.softmax((q * d ** -0.5) @ k.transpose(-2, -1), dim=-1)
    out = (weights @ v).transpose(1, 2).reshape(b, n, c)
    return attn.proj(out)


def _identity_proj(attn: ShadowInteractionAttention) -> None:
    with torch.no_grad():
        attn.proj.weight.copy_(torch.eye(attn.dim, dtype=attn.proj.weight.dtype))
        attn.proj.bias.zero_()


class TestWindows:
    def test_partition_order_and_reverse(self):
        x = torch.arange(2 * 4 * 4 * 3, dtype=torch.float32).reshape(2, 4, 4, 3)
        windows = window_partition(x, 2)
        assert windows.shape == (8, 4, 3)
        # second window of the first image is rows 0-1, columns 2-3
        torch.testing.assert_close(windows[1], x[0, 0:2, 2:4].reshape(4, 3))
        assert torch.equal(window_reverse(windows, 2, 4, 4), x)

    def test_indivisible(self):
        with pytest.raises(ShapeError):
            window_partition(torch.zeros(1, 6, 4, 2), 4)


class TestMaskPooling:
    def test_any_shadow_pixel_marks_the_cell(self):
        mask = torch.zeros(4, 4)
        mask[0, 0] = 1.0
        mask[3, 2] = 1.0
        assert pool_mask(mask, 1).tolist() == [[1.0, 0.0], [0.0, 1.0]]
        assert pool_mask(mask, 2).tolist() == [[1.0]]

    def test_batched(self):
        mask = torch.zeros(2, 8, 8)
        mask[1, 7, 7] = 1.0
        pooled = pool_mask(mask, 2)
        assert pooled.shape == (2, 2, 2)
        assert pooled.sum().item() == 1.0
        assert pooled[1, 1, 1].item() == 1.0

    def test_indivisible(self):
        with pytest.raises(ShapeError):
            pool_mask(torch.zeros(6, 8), 2)


class TestCorrelationMap:
    def test_xor_table(self):
        sigma = correlation_map(torch.tensor([0.0, 1.0, 1.0, 0.0]))
        expected = torch.tensor(
            [
                [0.0, 1.0, 1.0, 0.0],
                [1.0, 0.0, 0.0, 1.0],
                [1.0, 0.0, 0.0, 1.0],
                [0.0, 1.0, 1.0, 0.0],
            ]
        )
        assert torch.equal(sigma, expected)

    def test_symmetric_zero_diagonal(self):
        m = (torch.rand(3, 16) > 0.5).to(torch.float32)
        sigma = correlation_map(m)
        assert torch.equal(sigma, sigma.transpose(-2, -1))
        assert torch.all(torch.diagonal(sigma, dim1=-2, dim2=-1) == 0)

    def test_uniform_window_is_all_zero(self):
        assert correlation_map(torch.ones(9)).sum() == 0
        assert correlation_map(torch.zeros(9)).sum() == 0

    def test_complement_gives_same_map(self):
        m = (torch.rand(25) > 0.5).to(torch.float32)
        assert torch.equal(correlation_map(m), correlation_map(1.0 - m))

    def test_window_correlation_shape(self):
        pooled = (torch.rand(2, 8, 8) > 0.5).to(torch.float32)
        sigma = window_correlation(pooled, 4)
        assert sigma.shape == (8, 16, 16)
        windows = window_partition(pooled.unsqueeze(-1), 4).squeeze(-1)
        assert torch.equal(sigma[5], correlation_map(windows[5]))


class TestShadowInteractionAttention:
    def test_sigma_zero_is_vanilla_attention(self):
        attn = ShadowInteractionAttention(8, heads=2, sigma=0.0).double()
        x = torch.randn(3, 5, 8, dtype=torch.float64)
        sigma_map = correlation_map((torch.rand(3, 5) > 0.5).to(torch.float64))
        torch.testing.assert_close(attn(x, sigma_map), _vanilla(attn, x))
        torch.testing.assert_close(attn(x), _vanilla(attn, x))

    def test_uniform_window_scales_by_one_minus_sigma(self):
        attn = ShadowInteractionAttention(6, heads=1, sigma=0.2).double()
        _identity_proj(attn)
        x = torch.randn(2, 4, 6, dtype=torch.float64)
        zeros = torch.zeros(2, 4, 4, dtype=torch.float64)
        torch.testing.assert_close(attn(x, zeros), 0.8 * attn(x))

    def test_two_token_hand_computation(self):
        attn = ShadowInteractionAttention(1, heads=1, sigma=0.5).double()
        with torch.no_grad():
            attn.qkv.weight.fill_(1.0)
            attn.qkv.bias.zero_()
        _identity_proj(attn)

        x = torch.tensor([[[1.0], [2.0]]], dtype=torch.float64)  # q = k = v = x
        sigma_map = correlation_map(torch.tensor([0.0, 1.0], dtype=torch.float64))
        out, weights = attn(x, sigma_map, return_attention=True)

        e1, e2, e4 = math.exp(1.0), math.exp(2.0), math.exp(4.0)
        row0 = [0.5 * e1 / (e1 + e2), 1.0 * e2 / (e1 + e2)]
        row1 = [1.0 * e2 / (e2 + e4), 0.5 * e4 / (e2 + e4)]
        expected_weights = torch.tensor([[row0, row1]], dtype=torch.float64)
        expected_out = torch.tensor([[[row0[0] + 2 * row0[1]], [row1[0] + 2 * row1[1]]]], dtype=torch.float64)

        torch.testing.assert_close(weights, expected_weights)
        torch.testing.assert_close(out, expected_out)

    def test_rows_are_not_renormalized(self):
        attn = ShadowInteractionAttention(4, heads=1, sigma=0.3).double()
        x = torch.randn(1, 9, 4, dtype=torch.float64)
        m = torch.tensor([0, 1, 0, 1, 1, 0, 0, 0, 1], dtype=torch.float64)
        _, weights = attn(x, correlation_map(m), return_attention=True)
        sums = weights.sum(dim=-1)
        assert torch.all(sums <= 1.0 + 1e-12)
        assert torch.all(sums >= 0.7 - 1e-12)

    def test_permutation_equivariance(self):
        attn = ShadowInteractionAttention(8, heads=2, sigma=0.4).double()
        x = torch.randn(1, 7, 8, dtype=torch.float64)
        m = torch.tensor([1, 0, 0, 1, 1, 0, 1], dtype=torch.float64)
        perm = torch.randperm(7)

        out = attn(x, correlation_map(m))
        permuted = attn(x[:, perm], correlation_map(m[perm]))
        torch.testing.assert_close(permuted, out[:, perm])

    def test_mask_complement_invariance(self):
        attn = ShadowInteractionAttention(8, heads=2, sigma=0.2).double()
        x = torch.randn(2, 9, 8, dtype=torch.float64)
        m = (torch.rand(2, 9) > 0.5).to(torch.float64)
        torch.testing.assert_close(attn(x, correlation_map(m)), attn(x, correlation_map(1.0 - m)))

    def test_map_of_wrong_size(self):
        attn = ShadowInteractionAttention(4)
        with pytest.raises(ShapeError):
            attn(torch.randn(1, 4, 4), torch.zeros(1, 5, 5))

    def test_map_not_square(self):
        attn = ShadowInteractionAttention(4)
        with pytest.raises(ShapeError):
            attn(torch.randn(1, 4, 4), torch.zeros(1, 4, 3))

    def test_heads_must_divide_dim(self):
        with pytest.raises(ShapeError):
            ShadowInteractionAttention(6, heads=4)

    def test_gradcheck(self):
        attn = ShadowInteractionAttention(4, heads=2, sigma=0.2).double()
        x = torch.randn(2, 4, 4, dtype=torch.float64, requires_grad=True)
        sigma_map = correlation_map(torch.tensor([[0, 1, 1, 0], [1, 1, 1, 0]], dtype=torch.float64))
        assert torch.autograd.gradcheck(lambda t: attn(t, sigma_map), (x,), eps=1e-6, atol=1e-5, rtol=1e-3)


class TestRandomized:
    def test_sigma_zero_on_random_windows(self):
        g = torch.Generator().manual_seed(0)
        for _ in range(100):
            n = int(torch.randint(1, 65, (1,), generator=g))
            heads = int(torch.randint(1, 5, (1,), generator=g))
            head_dim = int(torch.randint(1, 32 // heads + 1, (1,), generator=g))
            attn = ShadowInteractionAttention(heads * head_dim, heads=heads, sigma=0.0)
            x = torch.randn(2, n, attn.dim, generator=g)
            sigma_map = correlation_map((torch.rand(2, n, generator=g) > 0.5).to(torch.float32))
            assert float((attn(x, sigma_map) - _vanilla(attn, x)).abs().max()) < 1e-6

    def test_xor_table_brute_force(self):
        g = torch.Generator().manual_seed(1)
        for _ in range(1000):
            n = int(torch.randint(1, 17, (1,), generator=g))
            m = (torch.rand(n, generator=g) > 0.5).to(torch.float32)
            bits = [int(v) for v in m.tolist()]
            expected = torch.tensor([[float(a ^ b) for b in bits] for a in bits])
            sigma = correlation_map(m)
            assert torch.equal(sigma, expected)
            assert torch.equal(sigma, correlation_map(1.0 - m))
