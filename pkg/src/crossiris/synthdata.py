"""Seeded synthetic multispectral eye renders with exact ground truth.

The iris texture is painted in annulus coordinates (angle, radial fraction
between the pupil and limbus boundaries), which makes pupil dilation an exact
re-parameterization of the same pattern: the rubber-sheet unwrap recovers it.
Per-band appearance follows a spectral contrast model: melanin-rich irises
keep texture contrast in NIR and lose it toward the blue end, while lightly
pigmented (scattering-dominated) irises vary much less across bands.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .exceptions import GeometryOutOfFrame
from .imaging import save_image
from .types import BANDS, EYE_COLORS, Circle, EyeImage, GroundTruth, SampleMeta

#: Frame sizes as (width, height): NIR cameras deliver portrait frames,
#: color captures are cropped to landscape VGA.
NIR_FRAME = (480, 640)
VIS_FRAME = (640, 480)

PUPIL_LUMINANCE = 0.05
SCLERA_LUMINANCE = 0.85

#: Eye-color mix of the evaluation population (blue : green : brown/hazel).
EYE_COLOR_WEIGHTS = (32, 18, 22)

DEFAULT_NOISE_SIGMA = 0.02


@dataclass(frozen=True)
class SpectralContrastModel:
    """Per-(eye color, band) texture contrast and mean luminance, both in [0, 1]."""

    contrast: dict[tuple[str, str], float]
    base_luminance: dict[tuple[str, str], float]

    def __post_init__(self) -> None:
        for (color, band), value in {**self.contrast, **self.base_luminance}.items():
            if color not in EYE_COLORS or band not in BANDS or band == "RGB":
                raise ValueError(f"bad model cell ({color}, {band})")
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"model value {value} outside [0, 1]")
        c = self.contrast
        if not c[("BROWN_HAZEL", "NIR")] >= c[("BROWN_HAZEL", "RED")] >= c[
            ("BROWN_HAZEL", "BLUE")
        ]:
            raise ValueError("brown/hazel contrast must fall from NIR to BLUE")
        for color in EYE_COLORS:
            if c[(color, "NIR")] < c[(color, "RED")]:
                raise ValueError(f"{color}: NIR contrast must be >= RED contrast")

        def spread(color: str) -> float:
            vals = [c[(color, b)] for b in ("NIR", "RED", "GREEN", "BLUE")]
            return max(vals) - min(vals)

        if not spread("BLUE") < spread("BROWN_HAZEL"):
            raise ValueError(
                "blue-eye contrast spread must be smaller than brown/hazel's"
            )

    @classmethod
    def default(cls) -> "SpectralContrastModel":
        # Calibrated so that, on the bundled generator defaults, the
        # brown/hazel subset separates clearly on RED and collapses on BLUE
        # while blue eyes stay nearly channel-independent; see
        # scripts/calibrate_synthetic_contrast.py for the measurement loop.
        contrast = {
            ("BROWN_HAZEL", "NIR"): 0.55, ("BROWN_HAZEL", "RED"): 0.34,
            ("BROWN_HAZEL", "GREEN"): 0.018, ("BROWN_HAZEL", "BLUE"): 0.006,
            ("GREEN", "NIR"): 0.55, ("GREEN", "RED"): 0.36,
            ("GREEN", "GREEN"): 0.20, ("GREEN", "BLUE"): 0.08,
            ("BLUE", "NIR"): 0.55, ("BLUE", "RED"): 0.40,
            ("BLUE", "GREEN"): 0.38, ("BLUE", "BLUE"): 0.30,
        }
        base = {
            ("BROWN_HAZEL", "NIR"): 0.52, ("BROWN_HAZEL", "RED"): 0.42,
            ("BROWN_HAZEL", "GREEN"): 0.33, ("BROWN_HAZEL", "BLUE"): 0.28,
            ("GREEN", "NIR"): 0.53, ("GREEN", "RED"): 0.45,
            ("GREEN", "GREEN"): 0.40, ("GREEN", "BLUE"): 0.33,
            ("BLUE", "NIR"): 0.55, ("BLUE", "RED"): 0.50,
            ("BLUE", "GREEN"): 0.48, ("BLUE", "BLUE"): 0.45,
        }
        return cls(contrast=contrast, base_luminance=base)


def generate_identity(seed: int, shape: tuple[int, int] = (64, 512)) -> np.ndarray:
    """Deterministic iris texture field T(theta, r) in [0, 1].

    Rows span the radial fraction [0, 1] between the boundaries, columns the
    angle [0, 2*pi); the field is periodic in the column axis. The pattern
    mixes radial fiber streaks (constant along r) with band-limited blob
    noise, which is what the encoders under test actually respond to.
    """
    rows, cols = shape
    rng = np.random.default_rng(seed)
    blobs = ndimage.gaussian_filter(
        rng.standard_normal((rows, cols)), sigma=(3.0, 5.0),
        mode=("nearest", "wrap"),
    )
    streaks = ndimage.gaussian_filter1d(
        rng.standard_normal(cols), sigma=4.0, mode="wrap"
    )

    def _unit(x: np.ndarray) -> np.ndarray:
        return (x - x.mean()) / x.std()

    fld = 0.45 * _unit(blobs) + 0.55 * _unit(streaks)[None, :]
    lo, hi = fld.min(), fld.max()
    return (fld - lo) / (hi - lo)


def sample_field(field: np.ndarray, theta: np.ndarray, r_frac: np.ndarray) -> np.ndarray:
    """Bilinear field lookup, wrapping the angular axis.

    Row coordinates follow the rubber-sheet convention (row i holds radial
    fraction (i + 0.5) / rows), so the unwrap inverts this sampling exactly.
    """
    rows, cols = field.shape
    col = (np.asarray(theta) / (2.0 * np.pi)) % 1.0 * cols
    row = np.clip(np.asarray(r_frac) * rows - 0.5, 0.0, rows - 1.0)

    c0 = np.floor(col).astype(int)
    fc = col - c0
    c0 %= cols
    c1 = (c0 + 1) % cols
    r0 = np.floor(row).astype(int)
    fr = row - r0
    r1 = np.minimum(r0 + 1, rows - 1)
    return (
        field[r0, c0] * (1 - fr) * (1 - fc)
        + field[r0, c1] * (1 - fr) * fc
        + field[r1, c0] * fr * (1 - fc)
        + field[r1, c1] * fr * fc
    )


def _frame_for(band: str) -> tuple[int, int]:
    return NIR_FRAME if band == "NIR" else VIS_FRAME


def render_eye(
    texture: np.ndarray,
    band: str,
    eye_color: str,
    gt: GroundTruth,
    model: SpectralContrastModel | None = None,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    noise_seed: int = 0,
    meta: SampleMeta | None = None,
) -> tuple[EyeImage, GroundTruth]:
    """Render one eye as band "NIR" (1 plane) or "RGB" (3 planes).

    Inside the annulus each plane is base_luminance + contrast * (T - 0.5)
    for its band; the pupil disk is dark, the sclera bright, and independent
    Gaussian sensor noise is added per plane. RGB renders may carry one
    saturated flash highlight disk (gt.highlight).
    """
    if band not in ("NIR", "RGB"):
        raise ValueError("render band must be NIR or RGB")
    model = model or SpectralContrastModel.default()
    w, h = _frame_for(band)

    pupil, limbus = gt.pupil, gt.limbus
    if (pupil.cx, pupil.cy) != (limbus.cx, limbus.cy):
        raise ValueError("synthetic renders use concentric boundary circles")
    if not (
        limbus.r < limbus.cx < w - limbus.r and limbus.r < limbus.cy < h - limbus.r
    ):
        raise GeometryOutOfFrame(
            f"limbus circle (r={limbus.r}) does not fit in {w}x{h} frame"
        )

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dist = np.hypot(xx - pupil.cx, yy - pupil.cy)
    theta = np.arctan2(yy - pupil.cy, xx - pupil.cx) - gt.rotation
    r_frac = (dist - pupil.r) / (limbus.r - pupil.r)
    annulus = (dist >= pupil.r) & (dist <= limbus.r)
    pattern = sample_field(texture, theta, np.clip(r_frac, 0.0, 1.0))

    rng = np.random.default_rng(noise_seed)
    plane_bands = ("NIR",) if band == "NIR" else ("RED", "GREEN", "BLUE")
    planes = []
    for plane_band in plane_bands:
        c = model.contrast[(eye_color, plane_band)]
        b = model.base_luminance[(eye_color, plane_band)]
        plane = np.where(annulus, b + c * (pattern - 0.5), 0.0)
        plane[dist < pupil.r] = PUPIL_LUMINANCE
        plane[dist > limbus.r] = SCLERA_LUMINANCE
        plane += rng.normal(0.0, noise_sigma, plane.shape)
        if band == "RGB" and gt.highlight is not None:
            hl = gt.highlight
            plane[np.hypot(xx - hl.cx, yy - hl.cy) <= hl.r] = 1.0
        planes.append(np.clip(plane, 0.0, 1.0))

    stack = planes[0] if band == "NIR" else np.stack(planes, axis=-1)
    pixels = np.round(stack * 255.0).astype(np.uint8)
    return EyeImage(pixels=pixels, band=band, meta=meta), gt


def _proportioned_counts(n: int, weights: tuple[int, ...] = EYE_COLOR_WEIGHTS) -> list[int]:
    """Largest-remainder apportionment of n items over the weights."""
    total = sum(weights)
    exact = [n * wgt / total for wgt in weights]
    counts = [int(np.floor(e)) for e in exact]
    remainders = sorted(
        range(len(weights)), key=lambda i: exact[i] - counts[i], reverse=True
    )
    for i in range(n - sum(counts)):
        counts[remainders[i % len(weights)]] += 1
    return counts


def _identity_seed(master_seed: int, subject: int, eye: int) -> int:
    return int(np.random.SeedSequence([master_seed, subject, eye]).generate_state(1)[0])


def generate_dataset(
    out_dir: str | os.PathLike,
    subjects: int = 20,
    eyes_per_subject: int = 2,
    nir_per_iris: int = 6,
    vis_per_iris: int = 3,
    seed: int = 0,
    model: SpectralContrastModel | None = None,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    pupil_jitter: float = 0.25,
    rotation_jitter_deg: float = 4.0,
    with_highlight: bool = True,
):
    """Write a reproducible synthetic dataset and return its loaded manifest.

    Per iris: ``nir_per_iris`` NIR renders plus ``vis_per_iris`` RGB renders,
    with per-render jitter in pupil radius (factor 1 +/- pupil_jitter),
    rotation (+/- rotation_jitter_deg), sensor noise, and flash highlight
    position. Everything, including the PNG bytes, is a pure function of the
    arguments. Files written: images/*.png, manifest.csv, groundtruth.jsonl.
    """
    from .evaluation import load_manifest

    model = model or SpectralContrastModel.default()
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)

    color_counts = _proportioned_counts(subjects)
    subject_colors = [
        color for color, count in zip(EYE_COLORS, color_counts) for _ in range(count)
    ]

    manifest_rows: list[str] = []
    gt_rows: list[str] = []
    for subj in range(subjects):
        eye_color = subject_colors[subj]
        for eye in range(eyes_per_subject):
            side = ("LEFT", "RIGHT")[eye]
            identity_seed = _identity_seed(seed, subj, eye)
            texture = generate_identity(identity_seed)
            iris_rng = np.random.default_rng([seed, subj, eye, 7])
            limbus_r = float(iris_rng.uniform(102.0, 118.0))
            pupil_base = 0.36 * limbus_r

            renders = [("NIR", i) for i in range(nir_per_iris)] + [
                ("VIS", i) for i in range(vis_per_iris)
            ]
            for spectrum, idx in renders:
                band = "NIR" if spectrum == "NIR" else "RGB"
                w, h = _frame_for(band)
                rng = np.random.default_rng(
                    [seed, subj, eye, idx, 0 if spectrum == "NIR" else 1]
                )
                pupil_r = pupil_base * float(
                    rng.uniform(1.0 - pupil_jitter, 1.0 + pupil_jitter)
                )
                rotation = float(
                    rng.uniform(-rotation_jitter_deg, rotation_jitter_deg)
                ) * np.pi / 180.0
                cx, cy = w / 2.0, h / 2.0
                highlight = None
                if spectrum == "VIS" and with_highlight:
                    angle = float(rng.uniform(0.0, 2.0 * np.pi))
                    rad = pupil_r + float(rng.uniform(0.35, 0.65)) * (
                        limbus_r - pupil_r
                    )
                    highlight = Circle(
                        cx=cx + rad * np.cos(angle),
                        cy=cy + rad * np.sin(angle),
                        r=float(rng.uniform(5.0, 9.0)),
                    )
                gt = GroundTruth(
                    pupil=Circle(cx=cx, cy=cy, r=pupil_r),
                    limbus=Circle(cx=cx, cy=cy, r=limbus_r),
                    identity_seed=identity_seed,
                    rotation=rotation,
                    highlight=highlight,
                )
                noise_seed = int(rng.integers(2**31))
                meta = SampleMeta(
                    subject_id=f"s{subj:03d}",
                    eye_side=side,
                    eye_color=eye_color,
                    spectrum=spectrum,
                )
                img, gt = render_eye(
                    texture, band, eye_color, gt, model,
                    noise_sigma=noise_sigma, noise_seed=noise_seed, meta=meta,
                )
                rel = f"images/s{subj:03d}_{side}_{spectrum.lower()}{idx}.png"
                save_image(img, out / rel)
                manifest_rows.append(
                    f"{meta.subject_id},{side},{spectrum},{eye_color},{rel}"
                )
                gt_rows.append(json.dumps(_gt_record(rel, gt), sort_keys=True))

    manifest_path = out / "manifest.csv"
    manifest_path.write_text(
        "subject_id,eye_side,spectrum,eye_color,path\n"
        + "\n".join(manifest_rows) + "\n",
        encoding="utf-8",
    )
    (out / "groundtruth.jsonl").write_text(
        "\n".join(gt_rows) + "\n", encoding="utf-8"
    )
    return load_manifest(manifest_path)


def _gt_record(path: str, gt: GroundTruth) -> dict:
    rec = {
        "path": path,
        "pupil": {"cx": gt.pupil.cx, "cy": gt.pupil.cy, "r": gt.pupil.r},
        "limbus": {"cx": gt.limbus.cx, "cy": gt.limbus.cy, "r": gt.limbus.r},
        "identity_seed": gt.identity_seed,
        "rotation": gt.rotation,
        "highlight": None,
    }
    if gt.highlight is not None:
        rec["highlight"] = {
            "cx": gt.highlight.cx, "cy": gt.highlight.cy, "r": gt.highlight.r,
        }
    return rec


def load_ground_truth(path: str | os.PathLike) -> dict[str, GroundTruth]:
    """Read a groundtruth.jsonl sidecar keyed by the image's manifest path."""
    table: dict[str, GroundTruth] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        highlight = None
        if rec.get("highlight"):
            hl = rec["highlight"]
            highlight = Circle(cx=hl["cx"], cy=hl["cy"], r=hl["r"])
        table[rec["path"]] = GroundTruth(
            pupil=Circle(**rec["pupil"]),
            limbus=Circle(**rec["limbus"]),
            identity_seed=int(rec["identity_seed"]),
            rotation=float(rec["rotation"]),
            highlight=highlight,
        )
    return table
