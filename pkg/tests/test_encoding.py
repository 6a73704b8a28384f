import numpy as np
import pytest

from crossiris.encoding import (
    DctPatchEncoder,
    GaborPhaseEncoder,
    code_from_bytes,
    code_to_bytes,
    encode_dct,
    encode_gabor,
    read_code,
    write_code,
)
from crossiris.exceptions import CodeFormatError, ShapeMismatch
from crossiris.matching import HammingMatcher
from crossiris.normalization import RubberSheetNormalizer
from crossiris.synthdata import generate_identity, render_eye
from crossiris.types import IrisCode, NormalizedIris

from conftest import gt_circles, gt_segmentation


def _norm(texture, mask=None):
    texture = np.asarray(texture, dtype=np.float64)
    if mask is None:
        mask = np.ones(texture.shape, dtype=np.bool_)
    return NormalizedIris(texture=texture, mask=mask)


def _full(rows=64, cols=512, value=0.5):
    return _norm(np.full((rows, cols), value))


def _synthetic_code(identity_seed, noise_seed=0, encoder=None, eye_color="BROWN_HAZEL"):
    texture = generate_identity(identity_seed)
    gt = gt_circles("NIR", identity_seed=identity_seed)
    img, _ = render_eye(texture, "NIR", eye_color, gt, noise_seed=noise_seed)
    normalized = RubberSheetNormalizer().normalize(img, gt_segmentation(img, gt))
    return (encoder or GaborPhaseEncoder()).encode(normalized)


class TestGaborEncoder:
    def test_pure_cosine_gives_half_period_bit_bands(self):
        # Half-pixel phase keeps every sample clear of the zero crossings.
        wavelength = 16.0
        phase = 2.0 * np.pi * (np.arange(512) + 0.5) / wavelength
        texture = 0.5 + 0.45 * np.cos(phase)
        code = GaborPhaseEncoder(scales=((wavelength, 6.0),)).encode(
            _norm(np.tile(texture, (64, 1)))
        )
        expected = np.cos(phase) > 0
        for row in range(0, code.shape[0], 2):  # Re rows
            np.testing.assert_array_equal(code.bits[row], expected)
        assert code.mask.all()

    def test_all_masked_input_gives_all_masked_code(self):
        n = _norm(np.random.default_rng(0).random((64, 512)),
                  mask=np.zeros((64, 512), dtype=np.bool_))
        code = encode_gabor(n)
        assert not code.mask.any()

    def test_code_shape_and_layout(self):
        code = encode_gabor(_full())
        enc = GaborPhaseEncoder()
        n_rad = 64 // enc.radial_step
        assert code.shape == (len(enc.scales) * n_rad * 2, 512 // enc.angular_step)

    def test_determinism_and_digest(self):
        a = _synthetic_code(70, 1)
        b = _synthetic_code(70, 1)
        np.testing.assert_array_equal(a.bits, b.bits)
        np.testing.assert_array_equal(a.mask, b.mask)
        assert a.params_digest == b.params_digest
        other = GaborPhaseEncoder(scales=((8.0, 3.0), (16.0, 6.0)))
        assert other.params_digest != a.params_digest

    def test_column_shift_equivariance_exact(self):
        texture = np.random.default_rng(3).random((64, 512))
        mask = np.random.default_rng(4).random((64, 512)) > 0.1
        shift = 5
        a = encode_gabor(_norm(texture, mask))
        b = encode_gabor(_norm(np.roll(texture, shift, axis=1),
                               np.roll(mask, shift, axis=1)))
        np.testing.assert_array_equal(np.roll(a.bits, shift, axis=1), b.bits)
        np.testing.assert_array_equal(np.roll(a.mask, shift, axis=1), b.mask)

    def test_mask_propagation_never_flips_valid_bits(self):
        texture = np.random.default_rng(5).random((64, 512))
        mask = np.ones((64, 512), dtype=np.bool_)
        a = encode_gabor(_norm(texture, mask))
        fewer = mask & (np.random.default_rng(6).random((64, 512)) > 0.2)
        b = encode_gabor(_norm(texture, fewer))
        still_valid = a.mask & b.mask
        np.testing.assert_array_equal(a.bits[still_valid], b.bits[still_valid])
        assert not (b.mask & ~a.mask).any()

    def test_occlusion_threshold_masks_bits(self):
        texture = np.random.default_rng(7).random((64, 512))
        mask = np.ones((64, 512), dtype=np.bool_)
        mask[:, 100:160] = False
        code = encode_gabor(_norm(texture, mask))
        assert not code.mask[:, 120:140].any()
        assert code.mask[:, 300:400].all()

    def test_bit_richness_over_identities(self):
        # Marginal bit balance and per-code entropy over 100 seeded irises.
        ps = []
        for seed in range(100):
            code = _synthetic_code(3000 + seed, seed)
            assert code.n_valid > 2048
            ps.append(float(code.bits[code.mask].mean()))
        ps = np.array(ps)
        assert ((ps > 0.4) & (ps < 0.6)).all()
        entropy = -(ps * np.log2(ps) + (1 - ps) * np.log2(1 - ps))
        assert (entropy >= 0.9).all()

    def test_grid_must_divide_texture(self):
        with pytest.raises(ShapeMismatch):
            GaborPhaseEncoder(radial_step=7).encode(_full())


class TestDctEncoder:
    def test_constant_texture_maps_to_zero_bits(self):
        code = encode_dct(_full(value=0.37))
        assert not code.bits.any()  # sign(0) -> 0 everywhere
        assert code.mask.all()

    def test_identical_textures_identical_codes(self):
        texture = np.random.default_rng(8).random((64, 512))
        a = encode_dct(_norm(texture))
        b = encode_dct(_norm(texture.copy()))
        np.testing.assert_array_equal(a.bits, b.bits)
        assert a.params_digest == b.params_digest

    def test_code_shape(self):
        code = encode_dct(_full())
        # 15 radial positions x 8 coefficients, 64 angular patch positions
        assert code.shape == (120, 64)

    def test_patch_shift_equivariance(self):
        texture = np.random.default_rng(9).random((64, 512))
        stride = 8  # patch_w 16, overlap 0.5
        a = encode_dct(_norm(texture))
        b = encode_dct(_norm(np.roll(texture, stride, axis=1)))
        np.testing.assert_array_equal(np.roll(a.bits, 1, axis=1), b.bits)

    def test_all_masked_input(self):
        n = _norm(np.random.default_rng(10).random((64, 512)),
                  mask=np.zeros((64, 512), dtype=np.bool_))
        assert not encode_dct(n).mask.any()

    def test_mask_rule_needs_both_patches(self):
        texture = np.random.default_rng(11).random((64, 512))
        mask = np.ones((64, 512), dtype=np.bool_)
        mask[:, 0:16] = False  # kill patch at angular position 0
        code = encode_dct(_norm(texture, mask))
        assert not code.mask[:, 0].any()    # patch 0 invalid
        assert not code.mask[:, 63].any()   # its predecessor pairs with it
        assert code.mask[:, 30].all()

    def test_impostor_codes_near_half_hamming(self):
        codes = [
            _synthetic_code(5000 + seed, 200 + seed, encoder=DctPatchEncoder())
            for seed in range(100)
        ]
        scores = HammingMatcher(max_shift=0).pairwise(codes, codes)
        iu = np.triu_indices(len(codes), k=1)
        mean = scores[iu].mean()
        assert 0.45 <= mean <= 0.55

    def test_coeffs_within_patch_width(self):
        with pytest.raises(ShapeMismatch):
            DctPatchEncoder(coeffs_kept=16).encode(_full())


class TestCodeSerialization:
    def test_roundtrip_bit_exact(self):
        code = _synthetic_code(81, 2)
        back = code_from_bytes(code_to_bytes(code))
        np.testing.assert_array_equal(back.bits, code.bits)
        np.testing.assert_array_equal(back.mask, code.mask)
        assert back.encoder_id == code.encoder_id
        assert back.params_digest == code.params_digest

    def test_exact_binary_layout(self):
        # 2x2 code, bits [[1,0],[1,1]] -> 0b1101 LSB-first = 0x0d
        code = IrisCode(
            bits=np.array([[1, 0], [1, 1]], dtype=np.bool_),
            mask=np.array([[1, 1], [0, 1]], dtype=np.bool_),
            encoder_id="gabor",
            params_digest="abcd",
        )
        blob = code_to_bytes(code)
        expected = (
            b"IXC1"
            + bytes([5]) + b"gabor"
            + (2).to_bytes(4, "little") + (2).to_bytes(4, "little")
            + bytes([4]) + b"abcd"
            + bytes([0x0D])   # bits plane
            + bytes([0x0B])   # mask plane: 1101 -> LSB-first 0b1011
        )
        assert blob == expected

    def test_file_roundtrip(self, tmp_path):
        code = _synthetic_code(82, 3, encoder=DctPatchEncoder())
        path = tmp_path / "probe.ixc"
        write_code(code, path)
        back = read_code(path)
        np.testing.assert_array_equal(back.bits, code.bits)

    def test_bad_magic_rejected(self):
        with pytest.raises(CodeFormatError):
            code_from_bytes(b"NOPE" + b"\x00" * 20)

    def test_truncation_rejected(self):
        blob = code_to_bytes(_synthetic_code(83, 4))
        with pytest.raises(CodeFormatError):
            code_from_bytes(blob[:-3])
