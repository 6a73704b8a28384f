"""Masked fractional Hamming distance with a rotation-compensating shift search.

Scores are dissimilarities in [0, 1]: 0 means identical codes, ~0.5 means
statistically independent ones. Bits where either validity mask is 0 never
influence a score. The kernel works on word-packed bit planes and popcounts.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InsufficientOverlap
from .types import IrisCode, MatchScore
from .validation import check_code_pair

DEFAULT_MAX_SHIFT = 8
DEFAULT_MIN_VALID_BITS = 64

if hasattr(np, "bitwise_count"):
    def _popcount(packed: np.ndarray, axis=None) -> np.ndarray | int:
        return np.bitwise_count(packed).sum(axis=axis, dtype=np.int64)
else:  # numpy < 2.0
    _POP_TABLE = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)

    def _popcount(packed: np.ndarray, axis=None) -> np.ndarray | int:
        return _POP_TABLE[packed].sum(axis=axis, dtype=np.int64)


def _pack(plane: np.ndarray) -> np.ndarray:
    # Row-major LSB-first packing; trailing pad bits are zero in every plane,
    # so they can never count as jointly valid.
    return np.packbits(plane.reshape(-1), bitorder="little")


def _shift_order(max_shift: int) -> list[int]:
    # Tie-break order for equal scores: smallest |s| first, negative before
    # positive; taking the first strict minimum then realizes the tie-break.
    return sorted(range(-max_shift, max_shift + 1), key=lambda s: (abs(s), s))


def _packed_hd(
    bits_a: np.ndarray, mask_a: np.ndarray, bits_b: np.ndarray, mask_b: np.ndarray
) -> tuple[int, int]:
    joint = mask_a & mask_b
    valid = int(_popcount(joint))
    if valid == 0:
        return 0, 0
    disagree = int(_popcount((bits_a ^ bits_b) & joint))
    return disagree, valid


def fractional_hd(
    a: IrisCode, b: IrisCode, min_valid_bits: int = DEFAULT_MIN_VALID_BITS
) -> MatchScore:
    """Shift-free fractional Hamming distance over jointly valid bits."""
    check_code_pair(a, b)
    disagree, valid = _packed_hd(
        _pack(a.bits), _pack(a.mask), _pack(b.bits), _pack(b.mask)
    )
    if valid < min_valid_bits:
        raise InsufficientOverlap(
            f"{valid} jointly valid bits < required {min_valid_bits}"
        )
    return MatchScore(score=disagree / valid, best_shift=0, valid_bits=valid)


def match_with_shifts(
    a: IrisCode,
    b: IrisCode,
    max_shift: int = DEFAULT_MAX_SHIFT,
    min_valid_bits: int = DEFAULT_MIN_VALID_BITS,
) -> MatchScore:
    """Minimum fractional HD over cyclic column shifts of ``b`` in
    [-max_shift, +max_shift]; bits and mask shift together.

    A negative best_shift means ``b`` matched after being rolled left
    (``numpy.roll`` sign convention on the column axis). Raises
    InsufficientOverlap only when every shift lacks valid overlap.
    """
    check_code_pair(a, b)
    if max_shift < 0:
        raise ValueError("max_shift must be >= 0")
    packed_a = (_pack(a.bits), _pack(a.mask))
    best: tuple[float, int, int] | None = None
    for s in _shift_order(max_shift):
        bits_s = np.roll(b.bits, s, axis=1)
        mask_s = np.roll(b.mask, s, axis=1)
        disagree, valid = _packed_hd(
            packed_a[0], packed_a[1], _pack(bits_s), _pack(mask_s)
        )
        if valid < min_valid_bits:
            continue
        score = disagree / valid
        if best is None or score < best[0]:
            best = (score, s, valid)
    if best is None:
        raise InsufficientOverlap(
            f"no shift in [-{max_shift}, {max_shift}] has "
            f"{min_valid_bits} jointly valid bits"
        )
    return MatchScore(score=best[0], best_shift=best[1], valid_bits=best[2])


class HammingMatcher:
    """Configured matcher plus a vectorized all-pairs kernel.

    ``pairwise`` scores every gallery/probe pair at once and returns NaN for
    pairs where no shift reaches ``min_valid_bits``.
    """

    def __init__(
        self,
        max_shift: int = DEFAULT_MAX_SHIFT,
        min_valid_bits: int = DEFAULT_MIN_VALID_BITS,
    ):
        self.max_shift = max_shift
        self.min_valid_bits = min_valid_bits

    def get_params(self, deep: bool = True) -> dict:
        return {"max_shift": self.max_shift, "min_valid_bits": self.min_valid_bits}

    def match(self, a: IrisCode, b: IrisCode) -> MatchScore:
        return match_with_shifts(a, b, self.max_shift, self.min_valid_bits)

    def hamming(self, a: IrisCode, b: IrisCode) -> MatchScore:
        return fractional_hd(a, b, self.min_valid_bits)

    def pairwise(self, gallery: list[IrisCode], probes: list[IrisCode]) -> np.ndarray:
        """Score matrix of shape (len(gallery), len(probes))."""
        if not gallery or not probes:
            return np.zeros((len(gallery), len(probes)), dtype=np.float64)
        for code in gallery[1:] + probes:
            check_code_pair(gallery[0], code)

        g_bits = np.stack([_pack(c.bits) for c in gallery])
        g_mask = np.stack([_pack(c.mask) for c in gallery])
        out = np.full((len(gallery), len(probes)), np.nan, dtype=np.float64)
        shifts = _shift_order(self.max_shift)
        for j, probe in enumerate(probes):
            per_shift = np.full((len(shifts), len(gallery)), np.inf)
            for k, s in enumerate(shifts):
                pb = _pack(np.roll(probe.bits, s, axis=1))
                pm = _pack(np.roll(probe.mask, s, axis=1))
                joint = g_mask & pm[None, :]
                valid = _popcount(joint, axis=1)
                disagree = _popcount((g_bits ^ pb[None, :]) & joint, axis=1)
                ok = valid >= self.min_valid_bits
                per_shift[k, ok] = disagree[ok] / valid[ok]
            best = per_shift.min(axis=0)
            out[:, j] = np.where(np.isfinite(best), best, np.nan)
        return out
