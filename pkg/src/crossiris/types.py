"""Core domain types shared across the pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import BoundaryOrderViolation

# Closed vocabularies. Eye colors follow the three-subset split used for
# evaluation; bands cover the acquisition spectra plus single RGB planes.
EYE_SIDES = ("LEFT", "RIGHT")
EYE_COLORS = ("BLUE", "GREEN", "BROWN_HAZEL")
SPECTRA = ("NIR", "VIS")
CHANNELS = ("RED", "GREEN", "BLUE")
BANDS = ("NIR", "RGB") + CHANNELS

# Pupil radius over limbus radius must stay inside this range for a
# segmentation to be anatomically plausible.
RADIUS_RATIO_RANGE = (0.15, 0.8)


def _require(value: str, allowed: tuple[str, ...], what: str) -> None:
    if value not in allowed:
        raise ValueError(f"{what} must be one of {allowed}, got {value!r}")


@dataclass(frozen=True)
class SampleMeta:
    """Acquisition metadata; (subject_id, eye_side) identifies one iris class."""

    subject_id: str
    eye_side: str
    eye_color: str
    spectrum: str
    source_path: str = ""

    def __post_init__(self) -> None:
        _require(self.eye_side, EYE_SIDES, "eye_side")
        _require(self.eye_color, EYE_COLORS, "eye_color")
        _require(self.spectrum, SPECTRA, "spectrum")

    @property
    def iris_id(self) -> tuple[str, str]:
        return (self.subject_id, self.eye_side)


@dataclass(frozen=True)
class EyeImage:
    """8-bit eye raster: one plane for NIR/single-channel, three for RGB.

    ``pixels`` is ``(h, w)`` uint8 for 1-plane bands and ``(h, w, 3)`` for RGB.
    """

    pixels: np.ndarray
    band: str
    meta: SampleMeta | None = None

    def __post_init__(self) -> None:
        _require(self.band, BANDS, "band")
        px = self.pixels
        if px.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        if self.band == "RGB":
            if px.ndim != 3 or px.shape[2] != 3:
                raise ValueError("RGB image requires an (h, w, 3) raster")
        elif px.ndim != 2:
            raise ValueError(f"{self.band} image requires an (h, w) raster")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image dimensions must be positive")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def n_planes(self) -> int:
        return 3 if self.band == "RGB" else 1


@dataclass(frozen=True)
class Circle:
    """Circle in pixel coordinates; center may be subpixel."""

    cx: float
    cy: float
    r: float

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError("circle radius must be positive")

    def center_distance(self, other: "Circle") -> float:
        return float(np.hypot(self.cx - other.cx, self.cy - other.cy))


@dataclass(frozen=True)
class SegmentationResult:
    """Pupil and limbic circles plus a validity mask (1 = usable iris pixel).

    The mask is zero everywhere outside the annulus between the two circles;
    occlusion handling may zero further pixels inside it.
    """

    pupil: Circle
    limbus: Circle
    noise_mask: np.ndarray

    def __post_init__(self) -> None:
        if self.noise_mask.dtype != np.bool_ or self.noise_mask.ndim != 2:
            raise ValueError("noise_mask must be a 2-D boolean raster")
        sep = self.pupil.center_distance(self.limbus)
        if sep + self.pupil.r >= self.limbus.r:
            raise BoundaryOrderViolation(
                f"pupil (r={self.pupil.r:.1f}) not strictly inside limbus "
                f"(r={self.limbus.r:.1f}, center offset {sep:.1f})"
            )
        ratio = self.pupil.r / self.limbus.r
        lo, hi = RADIUS_RATIO_RANGE
        if not lo <= ratio <= hi:
            raise BoundaryOrderViolation(
                f"pupil/limbus radius ratio {ratio:.3f} outside [{lo}, {hi}]"
            )


@dataclass(frozen=True)
class NormalizedIris:
    """Polar-unwrapped iris texture in [0, 1] with a per-pixel validity mask."""

    texture: np.ndarray
    mask: np.ndarray
    meta: SampleMeta | None = None

    def __post_init__(self) -> None:
        if self.texture.ndim != 2:
            raise ValueError("texture must be 2-D")
        if self.mask.shape != self.texture.shape or self.mask.dtype != np.bool_:
            raise ValueError("mask must be boolean and match the texture shape")

    @property
    def radial_res(self) -> int:
        return int(self.texture.shape[0])

    @property
    def angular_res(self) -> int:
        return int(self.texture.shape[1])


@dataclass(frozen=True)
class IrisCode:
    """Fixed-shape binary template; mask bit 0 means the bit carries no information.

    Bits where either comparison mask is 0 must never influence a score.
    """

    bits: np.ndarray
    mask: np.ndarray
    encoder_id: str
    params_digest: str

    def __post_init__(self) -> None:
        if self.bits.ndim != 2 or self.bits.dtype != np.bool_:
            raise ValueError("bits must be a 2-D boolean matrix")
        if self.mask.shape != self.bits.shape or self.mask.dtype != np.bool_:
            raise ValueError("mask must be boolean and match the bits shape")

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.bits.shape[0]), int(self.bits.shape[1]))

    @property
    def n_valid(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class MatchScore:
    """Fractional Hamming distance plus the shift that achieved it."""

    score: float
    best_shift: int
    valid_bits: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    """Geometry and provenance of one synthetic render."""

    pupil: Circle
    limbus: Circle
    identity_seed: int
    rotation: float = 0.0
    highlight: Circle | None = None


@dataclass
class ChannelPolicy:
    """Eye-color-aware RGB channel choice per encoder.

    Missing (eye_color, encoder_id) cells fall back to ``default_channel``.
    """

    table: dict[tuple[str, str], str] = field(default_factory=dict)
    default_channel: str = "RED"

    def __post_init__(self) -> None:
        _require(self.default_channel, CHANNELS, "default_channel")
        for (eye_color, _encoder), channel in self.table.items():
            _require(eye_color, EYE_COLORS, "policy eye_color")
            _require(channel, CHANNELS, "policy channel")

    def channel_for(self, eye_color: str, encoder_id: str) -> str:
        _require(eye_color, EYE_COLORS, "eye_color")
        return self.table.get((eye_color, encoder_id), self.default_channel)
