import numpy as np
import pytest

from crossiris.exceptions import SegmentationFailed
from crossiris.imaging import extract_channel
from crossiris.segmentation import IrisSegmenter, segment_iris, specular_mask
from crossiris.synthdata import generate_identity, render_eye
from crossiris.types import Circle, EyeImage

from conftest import gt_circles, nir_eye


def _circle_close(found: Circle, truth: Circle, tol: float = 2.0) -> bool:
    return (
        abs(found.cx - truth.cx) <= tol
        and abs(found.cy - truth.cy) <= tol
        and abs(found.r - truth.r) <= tol
    )


class TestSpecularMask:
    def test_uniform_midgray_all_valid(self):
        img = EyeImage(pixels=np.full((50, 60), 128, np.uint8), band="NIR")
        assert specular_mask(img).all()

    def test_single_saturated_pixel_dilates_to_disk(self):
        pixels = np.full((41, 41), 100, np.uint8)
        pixels[20, 20] = 255
        invalid = ~specular_mask(EyeImage(pixels=pixels, band="NIR"))
        # disk of radius 2: the 13 offsets with dy^2 + dx^2 <= 4
        assert invalid.sum() == 13
        yy, xx = np.nonzero(invalid)
        assert ((yy - 20) ** 2 + (xx - 20) ** 2 <= 4).all()

    def test_threshold_boundary(self):
        pixels = np.full((10, 10), 249, np.uint8)
        assert specular_mask(pixels, threshold=250, dilation_radius=0).all()
        pixels[:] = 250
        assert not specular_mask(pixels, threshold=250, dilation_radius=0).any()

    def test_flash_highlight_blob_area(self):
        texture = generate_identity(3)
        highlight = Circle(360.0, 270.0, 8.0)
        gt = gt_circles("RGB", identity_seed=3, highlight=highlight)
        img, _ = render_eye(texture, "RGB", "BLUE", gt, noise_seed=1)
        red = extract_channel(img, "RED")
        invalid = ~specular_mask(red)
        expected = np.pi * (highlight.r + 2) ** 2
        assert 0.8 * expected <= invalid.sum() <= 1.2 * expected


class TestSegmentIris:
    def test_recovers_known_circles(self):
        img, gt = nir_eye(identity_seed=21, noise_seed=2)
        res = segment_iris(img)
        assert _circle_close(res.pupil, gt.pupil)
        assert _circle_close(res.limbus, gt.limbus)

    def test_accuracy_across_radii(self):
        for k, (pupil_r, limbus_r) in enumerate([(30, 100), (40, 110), (52, 116)]):
            texture = generate_identity(100 + k)
            gt = gt_circles("NIR", pupil_r=pupil_r, limbus_r=limbus_r,
                            identity_seed=100 + k)
            img, _ = render_eye(texture, "NIR", "GREEN", gt, noise_seed=k)
            res = segment_iris(img)
            assert _circle_close(res.pupil, gt.pupil)
            assert _circle_close(res.limbus, gt.limbus)

    def test_uniform_image_fails(self):
        img = EyeImage(pixels=np.full((400, 400), 128, np.uint8), band="NIR")
        with pytest.raises(SegmentationFailed):
            segment_iris(img)

    def test_too_small_image_fails(self):
        img = EyeImage(pixels=np.zeros((150, 150), np.uint8), band="NIR")
        with pytest.raises(SegmentationFailed):
            segment_iris(img)

    def test_flash_level_robustness(self):
        # Same eye with and without a flash highlight: circles within 2 px.
        texture = generate_identity(33)
        gt_plain = gt_circles("RGB", pupil_r=42.0, limbus_r=112.0, identity_seed=33)
        gt_flash = gt_circles(
            "RGB", pupil_r=42.0, limbus_r=112.0, identity_seed=33,
            highlight=Circle(370.0, 270.0, 8.0),
        )
        a, _ = render_eye(texture, "RGB", "BLUE", gt_plain, noise_seed=9)
        b, _ = render_eye(texture, "RGB", "BLUE", gt_flash, noise_seed=9)
        ra = segment_iris(extract_channel(a, "RED"))
        rb = segment_iris(extract_channel(b, "RED"))
        for found, other in ((ra.pupil, rb.pupil), (ra.limbus, rb.limbus)):
            assert _circle_close(found, other, tol=2.0)

    def test_translation_equivariance(self):
        img, _ = nir_eye(identity_seed=8, noise_seed=3, pupil_r=40.0)
        base = segment_iris(img)
        dy, dx = 6, -9
        shifted = np.roll(np.roll(img.pixels, dy, axis=0), dx, axis=1)
        moved = segment_iris(EyeImage(pixels=shifted, band="NIR"))
        assert abs(moved.pupil.cx - base.pupil.cx - dx) <= 1
        assert abs(moved.pupil.cy - base.pupil.cy - dy) <= 1
        assert abs(moved.limbus.cx - base.limbus.cx - dx) <= 1
        assert abs(moved.limbus.cy - base.limbus.cy - dy) <= 1

    def test_result_invariants_hold(self):
        img, _ = nir_eye(identity_seed=55, noise_seed=1)
        res = segment_iris(img)
        sep = res.pupil.center_distance(res.limbus)
        assert sep + res.pupil.r < res.limbus.r
        assert 0.15 <= res.pupil.r / res.limbus.r <= 0.8

    def test_noise_mask_subset_of_annulus(self):
        img, _ = nir_eye(identity_seed=56, noise_seed=4)
        res = segment_iris(img)
        yy, xx = np.mgrid[0:img.height, 0:img.width]
        d_p = np.hypot(xx - res.pupil.cx, yy - res.pupil.cy)
        d_l = np.hypot(xx - res.limbus.cx, yy - res.limbus.cy)
        annulus = (d_p >= res.pupil.r) & (d_l <= res.limbus.r)
        assert not (res.noise_mask & ~annulus).any()

    def test_deterministic(self):
        img, _ = nir_eye(identity_seed=57, noise_seed=5)
        a = segment_iris(img)
        b = segment_iris(img)
        assert (a.pupil, a.limbus) == (b.pupil, b.limbus)
        np.testing.assert_array_equal(a.noise_mask, b.noise_mask)

    def test_transform_maps_batch(self):
        img1, _ = nir_eye(identity_seed=58, noise_seed=6)
        img2, _ = nir_eye(identity_seed=59, noise_seed=7)
        results = IrisSegmenter().transform([img1, img2])
        assert len(results) == 2

    def test_get_params_roundtrip(self):
        seg = IrisSegmenter(min_edge_strength=0.05)
        params = seg.get_params()
        assert params["min_edge_strength"] == 0.05
        clone = IrisSegmenter(**params)
        assert clone.get_params() == params
