"""Input validation helpers used by the estimator classes and module functions."""

from __future__ import annotations

import numpy as np

from .exceptions import IncompatibleCodes, NotColorImage
from .types import EyeImage, IrisCode, NormalizedIris, SegmentationResult


def check_gray_image(img: EyeImage, what: str = "image") -> np.ndarray:
    """Return the single plane of a 1-plane image as uint8, or raise."""
    if img.band == "RGB":
        raise NotColorImage(f"{what} must be single-plane, got RGB")
    return img.pixels


def check_color_image(img: EyeImage, what: str = "image") -> np.ndarray:
    if img.band != "RGB":
        raise NotColorImage(f"{what} must be RGB, got band {img.band}")
    return img.pixels


def check_segmentation_for(img: EyeImage, seg: SegmentationResult) -> None:
    if seg.noise_mask.shape != (img.height, img.width):
        raise ValueError(
            f"segmentation mask shape {seg.noise_mask.shape} does not match "
            f"image shape {(img.height, img.width)}"
        )


def check_code_pair(a: IrisCode, b: IrisCode) -> None:
    """Codes are comparable only when encoder, parameters, and shape agree."""
    if a.encoder_id != b.encoder_id:
        raise IncompatibleCodes(f"encoder {a.encoder_id!r} vs {b.encoder_id!r}")
    if a.params_digest != b.params_digest:
        raise IncompatibleCodes("codes were built with different parameters")
    if a.shape != b.shape:
        raise IncompatibleCodes(f"code shape {a.shape} vs {b.shape}")


def as_float_plane(pixels: np.ndarray) -> np.ndarray:
    """uint8 plane as float64 in [0, 1]."""
    return pixels.astype(np.float64) / 255.0


def check_texture_grid(n: NormalizedIris, radial_step: int, angular_step: int) -> None:
    from .exceptions import ShapeMismatch

    if radial_step < 1 or angular_step < 1:
        raise ShapeMismatch("grid steps must be positive")
    if n.radial_res % radial_step or n.angular_res % angular_step:
        raise ShapeMismatch(
            f"grid steps ({radial_step}, {angular_step}) must divide the "
            f"texture shape ({n.radial_res}, {n.angular_res})"
        )
