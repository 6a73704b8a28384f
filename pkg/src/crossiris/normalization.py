"""Rubber-sheet unwrapping of the iris annulus onto a fixed polar rectangle.

Each output pixel (i, j) samples the source image at the point that divides
the ray between the pupil and limbus boundary points at angle
theta = 2*pi*j/angular_res in ratio r = (i + 0.5)/radial_res, with bilinear
interpolation. The two boundary circles may be non-concentric; the angle is
measured about each circle's own center.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import EmptyValidRegion
from .types import EyeImage, NormalizedIris, SegmentationResult
from .validation import as_float_plane, check_gray_image, check_segmentation_for


def _bilinear_gather(
    values: np.ndarray, valid: np.ndarray, ys: np.ndarray, xs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear sample plus strict validity (all 4 neighbors valid, in frame)."""
    h, w = values.shape
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    fy = ys - y0
    fx = xs - x0
    y1 = y0 + 1
    x1 = x0 + 1

    in_frame = (y0 >= 0) & (x0 >= 0) & (y1 <= h - 1) & (x1 <= w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x1, 0, w - 1)

    v00 = values[y0c, x0c]
    v01 = values[y0c, x1c]
    v10 = values[y1c, x0c]
    v11 = values[y1c, x1c]
    sampled = (
        v00 * (1 - fy) * (1 - fx)
        + v01 * (1 - fy) * fx
        + v10 * fy * (1 - fx)
        + v11 * fy * fx
    )
    ok = (
        in_frame
        & valid[y0c, x0c]
        & valid[y0c, x1c]
        & valid[y1c, x0c]
        & valid[y1c, x1c]
    )
    return sampled, ok


class RubberSheetNormalizer(BaseEstimator, TransformerMixin):
    """Unwraps (image, segmentation) pairs into fixed-size normalized textures.

    The texture is min-max rescaled to [0, 1] over valid pixels; a constant
    valid region maps to all zeros. Values under invalid mask bits are kept
    (clipped into [0, 1]) so that shrinking the validity mask can only rescale
    the texture affinely, never perturb its spatial content.
    """

    def __init__(
        self,
        radial_res: int = 64,
        angular_res: int = 512,
        min_valid_fraction: float = 0.10,
    ):
        self.radial_res = radial_res
        self.angular_res = angular_res
        self.min_valid_fraction = min_valid_fraction

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[NormalizedIris]:
        return [self.normalize(img, seg) for img, seg in X]

    def normalize(self, img: EyeImage, seg: SegmentationResult) -> NormalizedIris:
        pixels = check_gray_image(img)
        check_segmentation_for(img, seg)
        values = as_float_plane(pixels)

        theta = 2.0 * np.pi * np.arange(self.angular_res) / self.angular_res
        rad = (np.arange(self.radial_res) + 0.5) / self.radial_res
        cos_t, sin_t = np.cos(theta), np.sin(theta)

        px = seg.pupil.cx + seg.pupil.r * cos_t
        py = seg.pupil.cy + seg.pupil.r * sin_t
        lx = seg.limbus.cx + seg.limbus.r * cos_t
        ly = seg.limbus.cy + seg.limbus.r * sin_t

        xs = (1.0 - rad)[:, None] * px[None, :] + rad[:, None] * lx[None, :]
        ys = (1.0 - rad)[:, None] * py[None, :] + rad[:, None] * ly[None, :]

        texture, mask = _bilinear_gather(values, seg.noise_mask, ys, xs)

        n_valid = int(mask.sum())
        if n_valid < self.min_valid_fraction * mask.size:
            raise EmptyValidRegion(
                f"only {n_valid}/{mask.size} normalized samples are valid"
            )

        lo = texture[mask].min()
        hi = texture[mask].max()
        span = hi - lo
        # Guard well above float rounding noise of the bilinear weights, so a
        # constant region maps to zeros instead of amplified epsilons.
        if span > 1e-9:
            texture = np.clip((texture - lo) / span, 0.0, 1.0)
        else:
            texture = np.zeros_like(texture)
        return NormalizedIris(texture=texture, mask=mask, meta=img.meta)


def rubber_sheet(
    img: EyeImage,
    seg: SegmentationResult,
    radial_res: int = 64,
    angular_res: int = 512,
    **params,
) -> NormalizedIris:
    """One-shot rubber-sheet unwrap with default (or overridden) parameters."""
    return RubberSheetNormalizer(
        radial_res=radial_res, angular_res=angular_res, **params
    ).normalize(img, seg)
