"""Pupil and limbus localization via an integro-differential circle search.

The detector maximizes, over circle candidates, the Gaussian-smoothed radial
derivative of the mean intensity along the circle: a coarse stride-4 sweep
over centers and radii followed by a stride-1 refinement in a small
neighborhood. The limbic contour integral is evaluated only on the left and
right 90-degree arcs to stay clear of eyelids, and the final validity mask
combines the annulus, a specular-highlight mask, and a horizontal eyelid cut.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import SegmentationFailed
from .types import Circle, EyeImage, SegmentationResult
from .validation import as_float_plane, check_gray_image

_MIN_IMAGE_SIDE = 200


def specular_mask(
    img: EyeImage | np.ndarray,
    threshold: int = 250,
    dilation_radius: int = 2,
) -> np.ndarray:
    """Validity raster (True = usable) excluding saturated pixels.

    Every pixel at or above ``threshold`` is invalid, together with a dilated
    ring of ``dilation_radius`` pixels around it (flash highlights bleed).
    """
    pixels = check_gray_image(img) if isinstance(img, EyeImage) else img
    saturated = pixels >= threshold
    if dilation_radius > 0 and saturated.any():
        saturated = ndimage.binary_dilation(
            saturated, structure=_disk(dilation_radius)
        )
    return ~saturated


def _disk(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return (yy * yy + xx * xx) <= radius * radius


def _circle_means(
    work: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray,
    angles: np.ndarray,
) -> np.ndarray:
    """Mean intensity on each (center, radius) circle, NaN samples excluded.

    ``work`` is a float image with NaN at invalid pixels; samples falling
    outside the frame are dropped as well. Rows with fewer than half their
    samples valid become NaN.
    """
    cy = centers[:, 0][:, None, None]
    cx = centers[:, 1][:, None, None]
    r = radii[None, :, None]
    ys = cy + r * np.sin(angles)[None, None, :]
    xs = cx + r * np.cos(angles)[None, None, :]
    samples = ndimage.map_coordinates(
        work, np.stack([ys, xs]), order=1, mode="constant", cval=np.nan
    )
    valid = np.isfinite(samples)
    counts = valid.sum(axis=-1)
    sums = np.where(valid, samples, 0.0).sum(axis=-1)
    means = sums / np.maximum(counts, 1)
    means[counts < angles.size // 2] = np.nan
    return means


def _edge_objective(means: np.ndarray, step: float, sigma: float) -> np.ndarray:
    """Smoothed outward intensity derivative per 1-px radius step.

    Entry ``[n, j]`` belongs to the boundary radius ``radii[j + 1]``: the edge
    sits at the larger radius of each consecutive pair.
    """
    deriv = np.diff(means, axis=1) / step
    invalid = ~np.isfinite(deriv)
    deriv = np.where(invalid, 0.0, deriv)
    smooth = ndimage.gaussian_filter1d(deriv, sigma=sigma, axis=1, mode="nearest")
    smooth[invalid] = -np.inf
    return smooth


def _best_circle(
    work: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray,
    angles: np.ndarray,
    sigma: float,
    bounds: tuple[float, float],
    min_radius_by_center: np.ndarray | None = None,
) -> tuple[np.ndarray, int, float]:
    """Strongest-edge circle; ties resolve to the lowest (cy, cx, r).

    ``radii`` should extend past ``bounds`` by the smoothing support; only
    boundary radii inside ``bounds`` may win, so window edges never benefit
    from the smoother's edge padding. ``min_radius_by_center`` optionally
    invalidates, per center, boundary radii at or below the given floor
    (the pupil-inside-limbus constraint).
    """
    means = _circle_means(work, centers, radii, angles)
    step = float(radii[1] - radii[0])
    obj = _edge_objective(means, step, sigma)
    boundary = radii[1:][None, :]
    obj = np.where(
        (boundary < bounds[0]) | (boundary > bounds[1]), -np.inf, obj
    )
    if min_radius_by_center is not None:
        obj = np.where(boundary <= min_radius_by_center[:, None], -np.inf, obj)
    obj = np.nan_to_num(obj, nan=-np.inf)
    n, j = np.unravel_index(np.argmax(obj), obj.shape)
    return centers[n], int(radii[j + 1]), float(obj[n, j])


def _center_grid(
    cy0: int, cx0: int, span: int, stride: int, shape: tuple[int, int]
) -> np.ndarray:
    """Centers on an anchor-aligned grid, cy-major order, clipped to the frame."""
    h, w = shape
    offsets = np.arange(-(span // stride) * stride, span + 1, stride)
    cys = np.unique(np.clip(cy0 + offsets, 2, h - 3))
    cxs = np.unique(np.clip(cx0 + offsets, 2, w - 3))
    grid = np.stack(np.meshgrid(cys, cxs, indexing="ij"), axis=-1)
    return grid.reshape(-1, 2)


class IrisSegmenter(BaseEstimator, TransformerMixin):
    """Circle-based iris segmenter with a coarse-to-fine edge search.

    Parameters
    ----------
    pupil_radius_range : (int, int)
        Pupil radius search interval in pixels.
    limbus_radius_max : int
        Upper bound on the limbic radius in pixels.
    limbus_center_slack : float
        Maximum distance between the limbic and pupil centers.
    coarse_stride : int
        Grid stride of the coarse sweep over centers and radii.
    refine_span : int
        Half-width of the stride-1 refinement neighborhood.
    gradient_sigma : float
        Gaussian sigma (in radius steps) smoothing the radial derivative.
    min_edge_strength : float
        Confidence floor on the smoothed derivative (intensity in [0, 1]
        per pixel of radius); weaker peaks raise SegmentationFailed.
    specular_threshold, specular_dilation : int
        Saturation cutoff and dilation radius of the highlight mask.
    eyelid_band : float
        Rows farther than ``eyelid_band * limbus.r`` from the limbus center
        are marked invalid (fixed horizontal eyelid cut).
    circle_samples : int
        Number of sample points per contour integral.
    """

    def __init__(
        self,
        pupil_radius_range: tuple[int, int] = (15, 90),
        limbus_radius_max: int = 220,
        limbus_center_slack: float = 15.0,
        coarse_stride: int = 4,
        refine_span: int = 4,
        gradient_sigma: float = 1.5,
        min_edge_strength: float = 0.02,
        specular_threshold: int = 250,
        specular_dilation: int = 2,
        eyelid_band: float = 0.9,
        circle_samples: int = 128,
    ):
        self.pupil_radius_range = pupil_radius_range
        self.limbus_radius_max = limbus_radius_max
        self.limbus_center_slack = limbus_center_slack
        self.coarse_stride = coarse_stride
        self.refine_span = refine_span
        self.gradient_sigma = gradient_sigma
        self.min_edge_strength = min_edge_strength
        self.specular_threshold = specular_threshold
        self.specular_dilation = specular_dilation
        self.eyelid_band = eyelid_band
        self.circle_samples = circle_samples

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[SegmentationResult]:
        return [self.segment(img) for img in X]

    def segment(self, img: EyeImage) -> SegmentationResult:
        pixels = check_gray_image(img)
        h, w = pixels.shape
        if h < _MIN_IMAGE_SIDE or w < _MIN_IMAGE_SIDE:
            raise SegmentationFailed(
                f"image {w}x{h} smaller than {_MIN_IMAGE_SIDE}px minimum"
            )
        valid = specular_mask(pixels, self.specular_threshold, self.specular_dilation)
        work = as_float_plane(pixels)
        work[~valid] = np.nan

        pupil = self._find_pupil(work)
        limbus = self._find_limbus(work, pupil)
        mask = self._noise_mask(pixels.shape, valid, pupil, limbus)
        return SegmentationResult(pupil=pupil, limbus=limbus, noise_mask=mask)

    # -- internals ----------------------------------------------------------

    def _full_angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.circle_samples) / self.circle_samples

    def _arc_angles(self) -> np.ndarray:
        # Left and right 90-degree arcs centered on the horizontal axis.
        half = self.circle_samples // 2
        right = -np.pi / 4 + (np.pi / 2) * (np.arange(half) + 0.5) / half
        return np.concatenate([right, right + np.pi])

    def _seed(self, work: np.ndarray) -> tuple[int, int]:
        """Darkest smoothed neighborhood; saturated pixels count as bright."""
        filled = np.where(np.isfinite(work), work, 1.0)
        blurred = ndimage.gaussian_filter(filled, sigma=12.0, mode="nearest")
        margin = 24
        interior = blurred[margin:-margin, margin:-margin]
        cy, cx = np.unravel_index(np.argmin(interior), interior.shape)
        return int(cy) + margin, int(cx) + margin

    def _search_stage(
        self,
        work: np.ndarray,
        center: tuple[int, int],
        center_span: int,
        r_lo: int,
        r_hi: int,
        angles: np.ndarray,
        center_limit: tuple[tuple[int, int], float] | None = None,
        containment: tuple[tuple[float, float], float] | None = None,
    ) -> tuple[np.ndarray, int, float]:
        """One coarse pass plus stride-1 refinement passes.

        The refinement window re-centers on its own best until that best is
        interior (plain hill climbing), so a coarse pick a few pixels off the
        optimum cannot pin the result to the window edge.
        """
        # Margin past the requested radius range so the Gaussian smoothing
        # never pads with (and thereby inflates) in-range edge values.
        support = int(np.ceil(3.0 * self.gradient_sigma)) + 1

        def run(center, stride, span, lo, hi):
            centers = _center_grid(center[0], center[1], span, stride, work.shape)
            if center_limit is not None:
                anchor, slack = center_limit
                dist = np.hypot(
                    centers[:, 0] - anchor[0], centers[:, 1] - anchor[1]
                )
                centers = centers[dist <= slack]
                if centers.size == 0:
                    centers = np.array([[anchor[0], anchor[1]]], dtype=int)
            radii = np.arange(
                max(lo - (support + 1) * stride, 2),
                hi + support * stride + 1,
                stride,
            )
            min_r = None
            if containment is not None:
                (pcy, pcx), pr = containment
                sep = np.hypot(centers[:, 0] - pcy, centers[:, 1] - pcx)
                min_r = sep + pr
            return _best_circle(
                work, centers, radii, angles, self.gradient_sigma,
                (lo, hi), min_r,
            )

        best = run(center, self.coarse_stride, center_span, r_lo, r_hi)
        for _ in range(8):
            anchor = (int(best[0][0]), int(best[0][1]))
            lo = max(r_lo, best[1] - self.refine_span)
            hi = min(r_hi, best[1] + self.refine_span)
            refined = run(anchor, 1, self.refine_span, lo, hi)
            moved = (
                tuple(refined[0]) != tuple(best[0]) or refined[1] != best[1]
            )
            best = refined
            if not moved:
                break
        return best

    def _find_pupil(self, work: np.ndarray) -> Circle:
        r_lo, r_hi = self.pupil_radius_range
        seed = self._seed(work)
        center, radius, strength = self._search_stage(
            work, seed, 7 * self.coarse_stride, r_lo, r_hi, self._full_angles()
        )
        if not np.isfinite(strength) or strength < self.min_edge_strength:
            raise SegmentationFailed(
                f"pupil edge strength {strength:.4f} below floor "
                f"{self.min_edge_strength}"
            )
        return Circle(cx=float(center[1]), cy=float(center[0]), r=float(radius))

    def _find_limbus(self, work: np.ndarray, pupil: Circle) -> Circle:
        r_lo = int(max(np.ceil(1.25 * pupil.r), 50))
        # Radius-ratio floor 0.15 caps how large the limbus may be.
        r_hi = int(min(self.limbus_radius_max, np.floor(pupil.r / 0.15)))
        anchor = (int(round(pupil.cy)), int(round(pupil.cx)))
        # Blank the pupil so its (much stronger) edge cannot leak into the
        # limbic objective through circles that graze it off-center.
        yy, xx = np.mgrid[0 : work.shape[0], 0 : work.shape[1]]
        work = np.where(
            np.hypot(xx - pupil.cx, yy - pupil.cy) <= pupil.r + 3.0, np.nan, work
        )
        center, radius, strength = self._search_stage(
            work,
            anchor,
            int(self.limbus_center_slack),
            r_lo,
            r_hi,
            self._arc_angles(),
            center_limit=(anchor, self.limbus_center_slack),
            containment=((pupil.cy, pupil.cx), pupil.r),
        )
        if not np.isfinite(strength) or strength < self.min_edge_strength:
            raise SegmentationFailed(
                f"limbus edge strength {strength:.4f} below floor "
                f"{self.min_edge_strength}"
            )
        return Circle(cx=float(center[1]), cy=float(center[0]), r=float(radius))

    def _noise_mask(
        self,
        shape: tuple[int, int],
        specular_valid: np.ndarray,
        pupil: Circle,
        limbus: Circle,
    ) -> np.ndarray:
        yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]]
        d_pupil = np.hypot(xx - pupil.cx, yy - pupil.cy)
        d_limbus = np.hypot(xx - limbus.cx, yy - limbus.cy)
        annulus = (d_pupil >= pupil.r) & (d_limbus <= limbus.r)
        eyelid_ok = np.abs(yy - limbus.cy) <= self.eyelid_band * limbus.r
        return annulus & specular_valid & eyelid_ok


def segment_iris(img: EyeImage, **params) -> SegmentationResult:
    """One-shot segmentation with default (or overridden) parameters."""
    return IrisSegmenter(**params).segment(img)
