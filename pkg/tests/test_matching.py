import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossiris.encoding import DctPatchEncoder
from crossiris.exceptions import IncompatibleCodes, InsufficientOverlap
from crossiris.matching import HammingMatcher, fractional_hd, match_with_shifts
from crossiris.normalization import RubberSheetNormalizer
from crossiris.synthdata import generate_identity, render_eye
from crossiris.types import IrisCode

from conftest import gt_circles, gt_segmentation
from crossiris.encoding import GaborPhaseEncoder


def _code(bits, mask=None, encoder_id="gabor", digest="d0"):
    bits = np.asarray(bits, dtype=np.bool_)
    if mask is None:
        mask = np.ones(bits.shape, dtype=np.bool_)
    return IrisCode(bits=bits, mask=np.asarray(mask, np.bool_),
                    encoder_id=encoder_id, params_digest=digest)


def _random_code(rng, rows=16, cols=128, mask_p=1.0, digest="d0"):
    bits = rng.random((rows, cols)) < 0.5
    mask = rng.random((rows, cols)) < mask_p
    return _code(bits, mask, digest=digest)


def _pipeline_code(identity_seed, noise_seed, rotation=0.0):
    texture = generate_identity(identity_seed)
    gt = gt_circles("NIR", identity_seed=identity_seed, rotation=rotation)
    img, _ = render_eye(texture, "NIR", "GREEN", gt, noise_seed=noise_seed)
    n = RubberSheetNormalizer().normalize(img, gt_segmentation(img, gt))
    return GaborPhaseEncoder().encode(n)


class TestFractionalHd:
    def test_self_match_is_zero(self):
        rng = np.random.default_rng(0)
        a = _random_code(rng)
        assert fractional_hd(a, a).score == 0.0

    def test_complement_is_one(self):
        rng = np.random.default_rng(1)
        a = _random_code(rng)
        b = _code(~a.bits)
        assert fractional_hd(a, b).score == 1.0

    def test_random_pair_near_half(self):
        # Binomial(2048, 0.5): 3 sigma of the fraction is 0.0332.
        rng = np.random.default_rng(42)
        a = _random_code(rng, rows=16, cols=128)  # 2048 bits
        b = _random_code(rng, rows=16, cols=128)
        score = fractional_hd(a, b).score
        assert abs(score - 0.5) <= 0.0332

    def test_valid_bits_counted(self):
        rng = np.random.default_rng(2)
        a = _random_code(rng, mask_p=0.8)
        b = _random_code(rng, mask_p=0.8)
        m = fractional_hd(a, b)
        assert m.valid_bits == int((a.mask & b.mask).sum())

    def test_insufficient_overlap(self):
        rng = np.random.default_rng(3)
        a = _random_code(rng)
        mask = np.zeros_like(a.mask)
        mask[0, :32] = True  # 32 < 64 jointly valid bits
        b = _code(a.bits, mask)
        with pytest.raises(InsufficientOverlap):
            fractional_hd(a, b)

    def test_incompatible_codes(self):
        rng = np.random.default_rng(4)
        a = _random_code(rng, digest="d0")
        b = _random_code(rng, digest="d1")
        with pytest.raises(IncompatibleCodes):
            fractional_hd(a, b)
        c = _random_code(rng, rows=8)
        with pytest.raises(IncompatibleCodes):
            fractional_hd(a, c)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        a = _random_code(rng, mask_p=0.9)
        b = _random_code(rng, mask_p=0.9)
        assert fractional_hd(a, b).score == fractional_hd(b, a).score


class TestMatchWithShifts:
    def test_recovers_cyclic_shift(self):
        rng = np.random.default_rng(6)
        a = _random_code(rng)
        b = _code(np.roll(a.bits, 3, axis=1))
        m = match_with_shifts(a, b, max_shift=4)
        assert m.score == 0.0
        # numpy.roll sign convention: b rolled by -3 realigns with a
        assert m.best_shift == -3

    def test_zero_shift_equals_fractional_hd(self):
        rng = np.random.default_rng(7)
        a = _random_code(rng, mask_p=0.9)
        b = _random_code(rng, mask_p=0.9)
        assert match_with_shifts(a, b, max_shift=0).score == fractional_hd(a, b).score

    def test_monotone_in_max_shift(self):
        rng = np.random.default_rng(8)
        a = _random_code(rng)
        b = _random_code(rng)
        scores = [match_with_shifts(a, b, max_shift=s).score for s in range(9)]
        assert all(s1 >= s2 for s1, s2 in zip(scores, scores[1:] ))

    def test_symmetric_scores(self):
        rng = np.random.default_rng(9)
        a = _random_code(rng, mask_p=0.85)
        b = _random_code(rng, mask_p=0.85)
        ab = match_with_shifts(a, b)
        ba = match_with_shifts(b, a)
        assert ab.score == ba.score
        assert ab.best_shift == -ba.best_shift or ab.score == 0.0

    def test_raises_only_when_every_shift_insufficient(self):
        rng = np.random.default_rng(10)
        a = _random_code(rng, rows=2, cols=40)  # 80 bits total
        mask_b = np.zeros((2, 40), dtype=np.bool_)
        mask_b[:, :20] = True  # 40 jointly valid bits max < 64
        b = _code(a.bits, mask_b)
        with pytest.raises(InsufficientOverlap):
            match_with_shifts(a, b, max_shift=2)

    def test_tie_breaks_prefer_small_then_negative_shift(self):
        bits = np.zeros((4, 32), dtype=np.bool_)
        a = _code(bits)
        b = _code(bits)  # every shift scores 0.0
        assert match_with_shifts(a, b, max_shift=4).best_shift == 0
        # force ties between -1 and +1 only
        bits2 = np.tile(np.arange(32) % 2 == 0, (4, 1))
        c = _code(bits2)
        d = _code(np.roll(bits2, 1, axis=1))
        m = match_with_shifts(c, d, max_shift=4)
        assert m.score == 0.0
        assert m.best_shift == -1  # +1 ties (period 2); negative wins

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_masked_bits_are_inert(self, seed):
        rng = np.random.default_rng(seed)
        a = _random_code(rng, mask_p=0.8)
        b = _random_code(rng, mask_p=0.8)
        before = match_with_shifts(a, b).score
        flip = ~a.mask & (rng.random(a.bits.shape) < 0.5)
        a2 = _code(a.bits ^ flip, a.mask)
        flip_b = ~b.mask & (rng.random(b.bits.shape) < 0.5)
        b2 = _code(b.bits ^ flip_b, b.mask)
        assert match_with_shifts(a2, b2).score == before

    def test_impostor_statistics_small_scale(self):
        codes = [_pipeline_code(8000 + k, 300 + k) for k in range(24)]
        iu = np.triu_indices(len(codes), k=1)
        plain = HammingMatcher(max_shift=0).pairwise(codes, codes)[iu]
        shifted = HammingMatcher(max_shift=8).pairwise(codes, codes)[iu]
        assert 0.45 <= plain.mean() <= 0.55
        assert shifted.mean() < plain.mean()
        assert 0.38 <= shifted.mean() <= 0.47


class TestHammingMatcher:
    def test_pairwise_matches_scalar_path(self):
        rng = np.random.default_rng(11)
        gallery = [_random_code(rng, mask_p=0.9) for _ in range(3)]
        probes = [_random_code(rng, mask_p=0.9) for _ in range(4)]
        matcher = HammingMatcher(max_shift=5)
        table = matcher.pairwise(gallery, probes)
        for i, g in enumerate(gallery):
            for j, p in enumerate(probes):
                assert table[i, j] == pytest.approx(
                    match_with_shifts(g, p, max_shift=5).score, abs=0.0
                )

    def test_pairwise_empty(self):
        assert HammingMatcher().pairwise([], []).shape == (0, 0)

    def test_pairwise_nan_on_insufficient_overlap(self):
        rng = np.random.default_rng(12)
        g = _random_code(rng, rows=2, cols=40)
        p = _code(g.bits, np.zeros((2, 40), np.bool_))
        table = HammingMatcher().pairwise([g], [p])
        assert np.isnan(table[0, 0])

    def test_get_params(self):
        assert HammingMatcher(max_shift=3).get_params()["max_shift"] == 3
