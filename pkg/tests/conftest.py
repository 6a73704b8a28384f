"""Shared fixtures: synthetic renders with ground-truth segmentations."""

from __future__ import annotations

import numpy as np
import pytest

from crossiris.segmentation import specular_mask
from crossiris.synthdata import generate_dataset, generate_identity, render_eye
from crossiris.types import Circle, EyeImage, GroundTruth, SegmentationResult

NIR_CENTER = (240.0, 320.0)  # (cx, cy) of the portrait NIR frame
VIS_CENTER = (320.0, 240.0)

EYELID_BAND = 0.9


def gt_circles(band: str, pupil_r: float = 40.0, limbus_r: float = 110.0,
               rotation: float = 0.0, identity_seed: int = 0,
               highlight: Circle | None = None) -> GroundTruth:
    cx, cy = NIR_CENTER if band == "NIR" else VIS_CENTER
    return GroundTruth(
        pupil=Circle(cx, cy, pupil_r),
        limbus=Circle(cx, cy, limbus_r),
        identity_seed=identity_seed,
        rotation=rotation,
        highlight=highlight,
    )


def gt_segmentation(img: EyeImage, gt: GroundTruth) -> SegmentationResult:
    """Segmentation built from ground truth (same mask rule as the segmenter)."""
    h, w = img.pixels.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    d_p = np.hypot(xx - gt.pupil.cx, yy - gt.pupil.cy)
    d_l = np.hypot(xx - gt.limbus.cx, yy - gt.limbus.cy)
    annulus = (d_p >= gt.pupil.r) & (d_l <= gt.limbus.r)
    eyelid_ok = np.abs(yy - gt.limbus.cy) <= EYELID_BAND * gt.limbus.r
    mask = annulus & specular_mask(img.pixels) & eyelid_ok
    return SegmentationResult(pupil=gt.pupil, limbus=gt.limbus, noise_mask=mask)


def nir_eye(identity_seed: int, noise_seed: int = 0, pupil_r: float = 40.0,
            rotation: float = 0.0, eye_color: str = "BROWN_HAZEL",
            noise_sigma: float = 0.02):
    """One NIR render plus its ground truth."""
    texture = generate_identity(identity_seed)
    gt = gt_circles("NIR", pupil_r=pupil_r, rotation=rotation,
                    identity_seed=identity_seed)
    img, _ = render_eye(texture, "NIR", eye_color, gt,
                        noise_sigma=noise_sigma, noise_seed=noise_seed)
    return img, gt


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory):
    """Small but complete dataset: 3 subjects x 2 eyes x (2 NIR + 1 VIS)."""
    out = tmp_path_factory.mktemp("mini_dataset")
    manifest = generate_dataset(
        out, subjects=3, eyes_per_subject=2, nir_per_iris=2, vis_per_iris=1,
        seed=11,
    )
    return manifest
