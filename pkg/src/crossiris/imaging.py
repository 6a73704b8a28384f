"""Image loading, VGA cropping, RGB channel decomposition, and channel policy.

Grayscale conversion is strictly "take one RGB plane verbatim": no luminance
mix, no re-weighting, so templates are reproducible from the decoded pixels.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import (
    BandMismatch,
    NotColorImage,
    PolicyFormatError,
    TargetTooLarge,
    UnreadableFile,
)
from .types import CHANNELS, EYE_COLORS, ChannelPolicy, EyeImage, SampleMeta
from .validation import check_color_image

_CHANNEL_INDEX = {"RED": 0, "GREEN": 1, "BLUE": 2}

#: Encoders the shipped default policy covers explicitly.
KNOWN_ENCODERS = ("gabor", "dct")


def load_image(path: str | os.PathLike, meta: SampleMeta | None = None) -> EyeImage:
    """Decode an 8-bit grayscale or 24-bit RGB file into an EyeImage.

    One decoded plane maps to band NIR, three planes to band RGB. When
    ``meta`` is given, its spectrum must agree with the plane count
    (NIR -> 1 plane, VIS -> 3 planes), otherwise BandMismatch is raised.
    """
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                raise UnreadableFile(
                    f"{path}: unsupported mode {im.mode!r}; need 8-bit L or RGB"
                )
            pixels = np.asarray(im, dtype=np.uint8)
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise UnreadableFile(f"cannot decode {path}: {exc}") from exc

    band = "NIR" if pixels.ndim == 2 else "RGB"
    if meta is not None:
        expected = "NIR" if meta.spectrum == "NIR" else "RGB"
        if band != expected:
            raise BandMismatch(
                f"{path}: {pixels.ndim}-plane file inconsistent with "
                f"spectrum {meta.spectrum}"
            )
        if not meta.source_path:
            meta = SampleMeta(
                meta.subject_id, meta.eye_side, meta.eye_color, meta.spectrum,
                source_path=str(path),
            )
    return EyeImage(pixels=pixels, band=band, meta=meta)


def crop_center(img: EyeImage, target_w: int, target_h: int) -> EyeImage:
    """Centered crop with offsets floor((dim - target) / 2); metadata preserved."""
    if target_w > img.width or target_h > img.height:
        raise TargetTooLarge(
            f"crop {target_w}x{target_h} exceeds source {img.width}x{img.height}"
        )
    ox = (img.width - target_w) // 2
    oy = (img.height - target_h) // 2
    return EyeImage(
        pixels=np.ascontiguousarray(img.pixels[oy:oy + target_h, ox:ox + target_w]),
        band=img.band,
        meta=img.meta,
    )


def extract_channel(img: EyeImage, channel: str) -> EyeImage:
    """Copy one RGB plane verbatim into a 1-plane image with band = channel."""
    check_color_image(img)
    if channel not in CHANNELS:
        raise NotColorImage(f"channel must be one of {CHANNELS}, got {channel!r}")
    plane = np.ascontiguousarray(img.pixels[:, :, _CHANNEL_INDEX[channel]])
    return EyeImage(pixels=plane, band=channel, meta=img.meta)


def select_channel(eye_color: str, encoder_id: str, policy: ChannelPolicy) -> str:
    """Policy table lookup; total via the policy's default channel."""
    return policy.channel_for(eye_color, encoder_id)


def default_policy() -> ChannelPolicy:
    """Shipped policy: the red channel for every eye color and encoder.

    Red gives the best texture visibility for the strongly pigmented subsets
    and is never far behind on the others, so it is the safe default; see
    ``configs/channel_policy.cfg`` for the documented per-cell alternates.
    """
    table = {
        (eye_color, encoder): "RED"
        for eye_color in EYE_COLORS
        for encoder in KNOWN_ENCODERS
    }
    return ChannelPolicy(table=table, default_channel="RED")


def load_policy(path: str | os.PathLike) -> ChannelPolicy:
    """Parse a plain-text policy file.

    Lines are ``eye_color.encoder_id = channel`` or ``default = channel``;
    blank lines and ``#`` comments are ignored; unknown keys are rejected.
    """
    table: dict[tuple[str, str], str] = {}
    default_channel = "RED"
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PolicyFormatError(f"{path}:{lineno}: expected 'key = channel'")
        key, _, value = (part.strip() for part in line.partition("="))
        if value not in CHANNELS:
            raise PolicyFormatError(
                f"{path}:{lineno}: channel must be one of {CHANNELS}, got {value!r}"
            )
        if key == "default":
            default_channel = value
            continue
        eye_color, dot, encoder_id = key.partition(".")
        if not dot or not encoder_id or eye_color not in EYE_COLORS:
            raise PolicyFormatError(
                f"{path}:{lineno}: unknown key {key!r}; expected "
                f"'<eye_color>.<encoder_id>' with eye_color in {EYE_COLORS}"
            )
        table[(eye_color, encoder_id)] = value
    return ChannelPolicy(table=table, default_channel=default_channel)


def save_image(img: EyeImage, path: str | os.PathLike) -> None:
    """Write an EyeImage losslessly (format from the file extension)."""
    mode = "RGB" if img.band == "RGB" else "L"
    Image.fromarray(img.pixels, mode=mode).save(path)
