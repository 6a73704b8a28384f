"""Binary iris encoders: Gabor phase quantization and DCT patch coding.

Both encoders map a NormalizedIris to a fixed-shape bit matrix whose column
axis is angular position, plus a per-bit validity mask. Bit values depend on
the texture only; the validity mask gates which bits may contribute to a
score. Sign ties (response exactly zero) always quantize to bit 0.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct as _dct
from scipy.signal import fftconvolve
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import CodeFormatError, ShapeMismatch
from .types import IrisCode, NormalizedIris
from .validation import check_texture_grid

_FORMAT_VERSION = 1


def _params_digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode("ascii")
    return hashlib.sha256(blob).hexdigest()[:16]


def _correlate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # fftconvolve flips the kernel; flip back so this is a correlation.
    return fftconvolve(img, kernel[::-1, ::-1], mode="valid")


def _pad_polar(arr: np.ndarray, half: int) -> np.ndarray:
    """Wrap the angular (column) axis, replicate edges on the radial axis."""
    wrapped = np.pad(arr, ((0, 0), (half, half)), mode="wrap")
    return np.pad(wrapped, ((half, half), (0, 0)), mode="edge")


class GaborPhaseEncoder(BaseEstimator, TransformerMixin):
    """Two bits per grid point and scale: the signs of Re and Im responses.

    The filter is a complex carrier along the angular axis under a circular
    Gaussian envelope; the real part is zero-DC corrected so the Re bit is
    invariant to illumination offset and positive rescaling. A bit is masked
    invalid when more than ``occlusion_threshold`` of the filter's
    energy-weighted support lies on invalid texture pixels.

    Code rows run scale-major, then radial grid position, then (Re, Im);
    columns are angular grid positions.
    """

    encoder_id = "gabor"

    def __init__(
        self,
        scales: tuple[tuple[float, float], ...] = ((16.0, 6.0), (32.0, 12.0)),
        radial_step: int = 8,
        angular_step: int = 1,
        occlusion_threshold: float = 0.25,
    ):
        self.scales = scales
        self.radial_step = radial_step
        self.angular_step = angular_step
        self.occlusion_threshold = occlusion_threshold

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[IrisCode]:
        return [self.encode(n) for n in X]

    @property
    def params_digest(self) -> str:
        return _params_digest(
            {
                "id": self.encoder_id,
                "scales": [[float(w), float(s)] for w, s in self.scales],
                "radial_step": int(self.radial_step),
                "angular_step": int(self.angular_step),
                "occlusion": float(self.occlusion_threshold),
                "fmt": _FORMAT_VERSION,
            }
        )

    def _kernels(self, wavelength: float, sigma: float):
        half = int(np.ceil(3.0 * sigma))
        span = np.arange(-half, half + 1, dtype=np.float64)
        dy, dx = np.meshgrid(span, span, indexing="ij")
        env = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
        phase = 2.0 * np.pi * dx / wavelength
        re = env * np.cos(phase)
        re -= env * (re.sum() / env.sum())  # zero-DC: constant input -> 0
        im = env * np.sin(phase)
        energy = env * env
        return half, re, im, energy / energy.sum()

    def encode(self, n: NormalizedIris) -> IrisCode:
        if not self.scales:
            raise ShapeMismatch("gabor bank needs at least one scale")
        check_texture_grid(n, self.radial_step, self.angular_step)
        rows_grid = np.arange(
            self.radial_step // 2, n.radial_res, self.radial_step
        )
        cols_grid = np.arange(0, n.angular_res, self.angular_step)
        invalid = (~n.mask).astype(np.float64)

        n_rad = rows_grid.size
        out_rows = len(self.scales) * n_rad * 2
        bits = np.zeros((out_rows, cols_grid.size), dtype=np.bool_)
        mask = np.zeros_like(bits)

        for s_idx, (wavelength, sigma) in enumerate(self.scales):
            if wavelength <= 0 or sigma <= 0:
                raise ShapeMismatch("gabor wavelength and sigma must be positive")
            half, k_re, k_im, k_energy = self._kernels(wavelength, sigma)
            padded = _pad_polar(n.texture, half)
            padded_invalid = _pad_polar(invalid, half)
            resp_re = _correlate(padded, k_re)
            resp_im = _correlate(padded, k_im)
            occl = _correlate(padded_invalid, k_energy)

            grid = np.ix_(rows_grid, cols_grid)
            bit_re = resp_re[grid] > 0.0
            bit_im = resp_im[grid] > 0.0
            ok = occl[grid] <= self.occlusion_threshold

            base = s_idx * n_rad * 2
            bits[base : base + 2 * n_rad : 2] = bit_re
            bits[base + 1 : base + 2 * n_rad : 2] = bit_im
            mask[base : base + 2 * n_rad : 2] = ok
            mask[base + 1 : base + 2 * n_rad : 2] = ok

        return IrisCode(
            bits=bits,
            mask=mask,
            encoder_id=self.encoder_id,
            params_digest=self.params_digest,
        )


class DctPatchEncoder(BaseEstimator, TransformerMixin):
    """Sign-coded DCT differences between angularly adjacent texture patches.

    Overlapping patches tile the texture (cyclically along the angular axis);
    each patch is row-averaged to a 1-D angular profile and transformed with
    an orthonormal type-II DCT. Bit (k, patch) is the sign of the difference
    of coefficient k (DC skipped) between a patch and its angular successor.
    A patch is invalid when more than ``occlusion_threshold`` of its pixels
    are invalid; a bit needs both contributing patches valid.

    Code rows run radial-position-major then coefficient index; columns are
    angular patch positions.
    """

    encoder_id = "dct"

    def __init__(
        self,
        patch_w: int = 16,
        patch_h: int = 8,
        overlap: float = 0.5,
        coeffs_kept: int = 8,
        occlusion_threshold: float = 0.25,
    ):
        self.patch_w = patch_w
        self.patch_h = patch_h
        self.overlap = overlap
        self.coeffs_kept = coeffs_kept
        self.occlusion_threshold = occlusion_threshold

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[IrisCode]:
        return [self.encode(n) for n in X]

    @property
    def params_digest(self) -> str:
        return _params_digest(
            {
                "id": self.encoder_id,
                "patch_w": int(self.patch_w),
                "patch_h": int(self.patch_h),
                "overlap": float(self.overlap),
                "coeffs_kept": int(self.coeffs_kept),
                "occlusion": float(self.occlusion_threshold),
                "fmt": _FORMAT_VERSION,
            }
        )

    def _strides(self) -> tuple[int, int]:
        if not 0.0 <= self.overlap < 1.0:
            raise ShapeMismatch("overlap must lie in [0, 1)")
        sh = max(int(round(self.patch_h * (1.0 - self.overlap))), 1)
        sw = max(int(round(self.patch_w * (1.0 - self.overlap))), 1)
        return sh, sw

    def encode(self, n: NormalizedIris) -> IrisCode:
        if not 1 <= self.coeffs_kept <= self.patch_w - 1:
            raise ShapeMismatch("coeffs_kept must lie in [1, patch_w - 1]")
        sh, sw = self._strides()
        if n.angular_res % sw:
            raise ShapeMismatch(
                f"angular stride {sw} must divide angular_res {n.angular_res}"
            )
        if n.radial_res < self.patch_h or (n.radial_res - self.patch_h) % sh:
            raise ShapeMismatch(
                f"radial layout (patch_h={self.patch_h}, stride={sh}) does not "
                f"tile radial_res {n.radial_res}"
            )
        n_ang = n.angular_res // sw
        row_starts = range(0, n.radial_res - self.patch_h + 1, sh)

        tex = np.concatenate([n.texture, n.texture[:, : self.patch_w]], axis=1)
        inv = np.concatenate([~n.mask, ~n.mask[:, : self.patch_w]], axis=1)
        inv = inv.astype(np.float64)

        k = self.coeffs_kept
        bits_blocks: list[np.ndarray] = []
        mask_blocks: list[np.ndarray] = []
        for r0 in row_starts:
            profile = tex[r0 : r0 + self.patch_h].mean(axis=0)
            segments = sliding_window_view(profile, self.patch_w)[::sw][:n_ang]
            coeffs = _dct(segments, type=2, norm="ortho", axis=1)[:, 1 : k + 1]

            inv_cols = inv[r0 : r0 + self.patch_h].mean(axis=0)
            frac = sliding_window_view(inv_cols, self.patch_w)[::sw][:n_ang]
            patch_ok = frac.mean(axis=1) <= self.occlusion_threshold

            diff = np.roll(coeffs, -1, axis=0) - coeffs
            bits_blocks.append((diff > 0.0).T)  # (k, n_ang)
            pair_ok = patch_ok & np.roll(patch_ok, -1)
            mask_blocks.append(np.broadcast_to(pair_ok, (k, n_ang)))

        return IrisCode(
            bits=np.ascontiguousarray(np.concatenate(bits_blocks, axis=0)),
            mask=np.ascontiguousarray(np.concatenate(mask_blocks, axis=0)),
            encoder_id=self.encoder_id,
            params_digest=self.params_digest,
        )


def encode_gabor(n: NormalizedIris, **params) -> IrisCode:
    """Encode with the default (or overridden) Gabor bank."""
    return GaborPhaseEncoder(**params).encode(n)


def encode_dct(n: NormalizedIris, **params) -> IrisCode:
    """Encode with the default (or overridden) DCT patch parameters."""
    return DctPatchEncoder(**params).encode(n)


def make_encoder(encoder_id: str, **params):
    if encoder_id == "gabor":
        return GaborPhaseEncoder(**params)
    if encoder_id == "dct":
        return DctPatchEncoder(**params)
    raise ValueError(f"unknown encoder id {encoder_id!r}")


# --- serialized template format ------------------------------------------
#
# Binary layout (all integers little-endian):
#   magic            4 bytes  b"IXC1"
#   encoder id       1-byte length n, then n ASCII bytes
#   rows             uint32
#   cols             uint32
#   params digest    1-byte length m, then m ASCII bytes
#   bits plane       ceil(rows*cols/8) bytes
#   mask plane       ceil(rows*cols/8) bytes
# Planes pack the row-major flattened matrix LSB-first within each byte
# (bit index i lands in byte i // 8 at position i % 8).

MAGIC = b"IXC1"


def code_to_bytes(code: IrisCode) -> bytes:
    enc = code.encoder_id.encode("ascii")
    dig = code.params_digest.encode("ascii")
    if len(enc) > 255 or len(dig) > 255:
        raise CodeFormatError("encoder id / digest too long to serialize")
    rows, cols = code.shape
    head = b"".join(
        [MAGIC, bytes([len(enc)]), enc, struct.pack("<II", rows, cols),
         bytes([len(dig)]), dig]
    )
    bits = np.packbits(code.bits.reshape(-1), bitorder="little").tobytes()
    mask = np.packbits(code.mask.reshape(-1), bitorder="little").tobytes()
    return head + bits + mask


def code_from_bytes(buf: bytes) -> IrisCode:
    view = memoryview(buf)
    if bytes(view[:4]) != MAGIC:
        raise CodeFormatError("bad magic; not an IXC1 template")
    pos = 4
    try:
        n_enc = view[pos]
        pos += 1
        encoder_id = bytes(view[pos : pos + n_enc]).decode("ascii")
        pos += n_enc
        rows, cols = struct.unpack_from("<II", view, pos)
        pos += 8
        n_dig = view[pos]
        pos += 1
        digest = bytes(view[pos : pos + n_dig]).decode("ascii")
        pos += n_dig
        plane = (rows * cols + 7) // 8
        if len(buf) != pos + 2 * plane:
            raise CodeFormatError(
                f"expected {pos + 2 * plane} bytes, got {len(buf)}"
            )
        raw_bits = np.frombuffer(view[pos : pos + plane], dtype=np.uint8)
        raw_mask = np.frombuffer(view[pos + plane :], dtype=np.uint8)
    except (IndexError, struct.error) as exc:
        raise CodeFormatError(f"truncated template: {exc}") from exc
    bits = np.unpackbits(raw_bits, count=rows * cols, bitorder="little")
    mask = np.unpackbits(raw_mask, count=rows * cols, bitorder="little")
    return IrisCode(
        bits=bits.reshape(rows, cols).astype(np.bool_),
        mask=mask.reshape(rows, cols).astype(np.bool_),
        encoder_id=encoder_id,
        params_digest=digest,
    )


def write_code(code: IrisCode, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(code_to_bytes(code))


def read_code(path: str | os.PathLike) -> IrisCode:
    with open(path, "rb") as fh:
        return code_from_bytes(fh.read())
