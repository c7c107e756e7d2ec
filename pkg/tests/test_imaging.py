# tests/test_imaging.py

import cv2
import numpy as np
import pytest
import torch
from skimage.color import rgb2lab

from shadowformer.exceptions import FormatError, ShapeError
from shadowformer.services.imaging import (
    binarize_mask,
    lab_to_srgb,
    load_image,
    load_mask,
    resize_bilinear,
    save_image,
    srgb_to_lab,
    to_uint8,
)


class TestImageIO:
    def test_8bit_png_scales_by_255(self, tmp_path):
        path = tmp_path / "gray.png"
        cv2.imwrite(str(path), np.full((4, 5), 51, dtype=np.uint8))
        img = load_image(path)
        assert img.shape == (1, 4, 5)
        assert img.dtype == torch.float32
        assert float(img[0, 0, 0]) == pytest.approx(0.2)

    def test_16bit_png_scales_by_65535(self, tmp_path):
        path = tmp_path / "deep.png"
        cv2.imwrite(str(path), np.full((3, 3, 3), 65535, dtype=np.uint16))
        assert torch.all(load_image(path) == 1.0)

    def test_bgr_is_returned_as_rgb(self, tmp_path):
        path = tmp_path / "red.png"
        bgr = np.zeros((2, 2, 3), dtype=np.uint8)
        bgr[..., 2] = 255
        cv2.imwrite(str(path), bgr)
        img = load_image(path)
        assert torch.all(img[0] == 1.0)
        assert torch.all(img[1:] == 0.0)

    def test_save_then_load_is_exact_on_8bit_values(self, tmp_path):
        levels = torch.randint(0, 256, (3, 6, 7)).to(torch.float64) / 255.0
        path = save_image(levels, tmp_path / "nested" / "out.png")
        torch.testing.assert_close(load_image(path).to(torch.float64), levels, atol=1e-7, rtol=0)

    def test_to_uint8_rounds_and_clamps(self):
        img = torch.tensor([[[-0.5, 0.6 / 255.0, 0.4 / 255.0, 2.0]]])
        assert to_uint8(img)[0, :, 0].tolist() == [0, 1, 0, 255]

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "absent.png")

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "image.bmp"
        path.write_bytes(b"BM")
        with pytest.raises(FormatError):
            load_image(path)

    def test_undecodable_png(self, tmp_path):
        path = tmp_path / "broken.png"
        path.write_bytes(b"not a png")
        with pytest.raises(FormatError):
            load_image(path)


class TestMasks:
    def test_threshold_is_strict(self):
        img = torch.tensor([[[0.0, 0.5, 0.51, 1.0]]])
        assert binarize_mask(img).tolist() == [[0.0, 0.0, 1.0, 1.0]]

    def test_channel_mean_is_thresholded(self):
        img = torch.zeros(3, 1, 2)
        img[:, 0, 0] = torch.tensor([1.0, 1.0, 0.0])  # mean 2/3
        img[:, 0, 1] = torch.tensor([1.0, 0.0, 0.0])  # mean 1/3
        assert binarize_mask(img).tolist() == [[1.0, 0.0]]

    def test_binarizing_a_mask_again_changes_nothing(self):
        mask = binarize_mask(torch.rand(3, 9, 7))
        assert torch.equal(binarize_mask(mask), mask)
        assert torch.equal(binarize_mask(binarize_mask(mask)), mask)

    def test_load_mask_is_binary(self, tmp_path):
        path = tmp_path / "mask.png"
        cv2.imwrite(str(path), np.array([[0, 100, 200, 255]], dtype=np.uint8))
        mask = load_mask(path)
        assert mask.shape == (1, 4)
        assert set(mask.unique().tolist()) <= {0.0, 1.0}
        assert mask.tolist() == [[0.0, 0.0, 1.0, 1.0]]


class TestLab:
    def test_white(self):
        lab = srgb_to_lab(torch.ones(3, 2, 2))
        assert float(lab[0, 0, 0]) == pytest.approx(100.0, abs=1e-3)
        assert float(lab[1].abs().max()) < 1e-3
        assert float(lab[2].abs().max()) < 1e-3

    def test_black(self):
        lab = srgb_to_lab(torch.zeros(3, 1, 1))
        assert lab.abs().max() < 1e-9

    def test_mid_gray(self):
        lab = srgb_to_lab(torch.full((3, 1, 1), 0.5))
        assert float(lab[0, 0, 0]) == pytest.approx(53.389, abs=0.01)

    def test_agrees_with_skimage(self):
        rng = np.random.default_rng(3)
        rgb = rng.uniform(0.0, 1.0, size=(8, 9, 3))
        ours = srgb_to_lab(torch.from_numpy(rgb.transpose(2, 0, 1))).numpy().transpose(1, 2, 0)
        np.testing.assert_allclose(ours, rgb2lab(rgb), atol=0.05)

    def test_round_trip(self):
        img = torch.rand(3, 5, 5, dtype=torch.float64)
        torch.testing.assert_close(lab_to_srgb(srgb_to_lab(img)), img, atol=1e-6, rtol=0)

    def test_rejects_single_channel(self):
        with pytest.raises(ShapeError):
            srgb_to_lab(torch.zeros(1, 2, 2))


class TestResize:
    def test_same_size_is_a_copy(self):
        img = torch.rand(3, 6, 4)
        out = resize_bilinear(img, 6, 4)
        assert torch.equal(out, img)
        assert out.data_ptr() != img.data_ptr()

    def test_constant_stays_constant(self):
        out = resize_bilinear(torch.full((3, 7, 5), 0.3), 16, 11)
        torch.testing.assert_close(out, torch.full((3, 16, 11), 0.3))

    def test_two_to_three_pixels(self):
        out = resize_bilinear(torch.tensor([[[0.0, 1.0]]]), 1, 3)
        torch.testing.assert_close(out, torch.tensor([[[0.0, 0.5, 1.0]]]))

    def test_nearest_keeps_masks_binary(self):
        mask = (torch.rand(9, 13) > 0.5).to(torch.float32)
        out = resize_bilinear(mask, 32, 32, nearest=True)
        assert out.shape == (32, 32)
        assert set(out.unique().tolist()) <= {0.0, 1.0}

    def test_rejects_empty_target(self):
        with pytest.raises(ValueError):
            resize_bilinear(torch.zeros(3, 4, 4), 0, 4)
