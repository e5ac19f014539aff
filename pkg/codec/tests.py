import json
import tempfile
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from django.test import SimpleTestCase

from core.exceptions import InvalidInput

from .embedding import (
    LatentTensor, UniformVector, bit_accuracy, bits_to_uniform, embed,
    latent_to_bits, uniform_to_latent,
)
from .messages import BitMessage, StegoKey, random_message, read_message, write_message
from .normal import inverse_normal_cdf, normal_cdf


def _bisect_quantile(p, tol=1e-13):
    lo, hi = -40.0, 40.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class InverseNormalCdfTests(SimpleTestCase):

    def test_median_is_zero(self):
        self.assertEqual(inverse_normal_cdf(0.5), 0.0)

    def test_known_quantiles_match_bisection(self):
        for p, expected in ((0.25, -0.6744897501), (0.975, 1.9599639845)):
            z = inverse_normal_cdf(p)
            self.assertAlmostEqual(z, expected, places=9)
            self.assertAlmostEqual(z, _bisect_quantile(p), places=11)

    def test_cdf_residual_on_dense_grid(self):
        p = np.linspace(1e-10, 1 - 1e-10, 100_000)
        z = inverse_normal_cdf(p)
        self.assertLessEqual(np.max(np.abs(normal_cdf(z) - p)), 1e-12)

    def test_monotone_on_sorted_pairs(self):
        rng = np.random.default_rng(3)
        pairs = np.sort(rng.uniform(1e-9, 1 - 1e-9, size=(10_000, 2)), axis=1)
        pairs = pairs[pairs[:, 0] < pairs[:, 1]]
        z = inverse_normal_cdf(pairs)
        self.assertTrue(np.all(z[:, 0] < z[:, 1]))

    def test_antisymmetry(self):
        # dyadic probabilities keep 1 - p exact
        k = np.unique(np.geomspace(np.ceil(1e-8 * 2 ** 40), 2 ** 39, 5000).astype(np.int64))
        p = k / 2.0 ** 40
        self.assertLessEqual(np.max(np.abs(inverse_normal_cdf(p) + inverse_normal_cdf(1 - p))), 1e-10)

    def test_extremes_are_clamped_and_finite(self):
        z = inverse_normal_cdf(np.array([0.0, 1.0]))
        self.assertTrue(np.isfinite(z).all())
        self.assertLess(z[0], -6.5)
        self.assertEqual(z[0], -z[1])

    def test_nan_is_rejected(self):
        with self.assertRaises(InvalidInput):
            inverse_normal_cdf(float('nan'))


class EmbeddingTests(SimpleTestCase):

    def setUp(self):
        self.key = StegoKey(2024)

    def test_midpoints(self):
        s = bits_to_uniform(BitMessage([0, 1]), self.key, mode='midpoint')
        assert_array_equal(s.values, [0.25, 0.75])

    def test_random_mode_stratification(self):
        msg = random_message(50_000, np.random.default_rng(1))
        s = bits_to_uniform(msg, self.key).values
        zeros = msg.bits == 0
        self.assertTrue(np.all((s[zeros] > 0) & (s[zeros] < 0.5)))
        self.assertTrue(np.all((s[~zeros] >= 0.5) & (s[~zeros] < 1)))

    def test_random_mode_is_keyed(self):
        msg = random_message(256, np.random.default_rng(2))
        a = bits_to_uniform(msg, StegoKey(7)).values
        b = bits_to_uniform(msg, StegoKey(7)).values
        c = bits_to_uniform(msg, StegoKey(8)).values
        assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

    def test_empty_message_rejected(self):
        with self.assertRaises(InvalidInput):
            bits_to_uniform(np.array([], dtype=np.uint8), self.key)

    def test_bad_key_rejected(self):
        with self.assertRaises(InvalidInput):
            StegoKey(-1)
        with self.assertRaises(InvalidInput):
            StegoKey(2 ** 64)

    def test_uniform_to_latent_values(self):
        z = uniform_to_latent(UniformVector([0.5]), (1, 1, 1))
        self.assertEqual(z.flat[0], 0.0)
        z = uniform_to_latent(UniformVector([0.25, 0.75]), (2, 1, 1))
        assert_allclose(z.flat, [-0.6744897501960817, 0.6744897501960817], atol=1e-12)

    def test_midpoint_latents_have_constant_magnitude(self):
        msg = random_message(1024, np.random.default_rng(4))
        z = embed(msg, self.key, (4, 16, 16), mode='midpoint')
        assert_allclose(np.abs(z.flat), 0.6744897501960817, atol=1e-12)

    def test_shape_mismatch(self):
        with self.assertRaises(InvalidInput):
            uniform_to_latent(UniformVector([0.3, 0.6, 0.9]), (2, 1, 1))


class DecodingTests(SimpleTestCase):

    def test_zero_threshold_rule(self):
        bits = latent_to_bits(LatentTensor.from_flat([-0.1, 0.0, 2.3]))
        assert_array_equal(bits.bits, [0, 1, 1])

    def test_round_trip_exact(self):
        rng = np.random.default_rng(5)
        for trial in range(100):
            msg = random_message(1024, rng)
            for mode in ('random', 'midpoint'):
                z = embed(msg, StegoKey(trial), (4, 16, 16), mode=mode)
                self.assertEqual(bit_accuracy(latent_to_bits(z), msg), 1.0)

    def test_negation_flips_all_nonzero(self):
        z = np.array([-1.5, -0.0, 0.0, 0.2, 3.0])
        flipped = latent_to_bits(-z).bits
        original = latent_to_bits(z).bits
        nonzero = z != 0
        assert_array_equal(flipped[nonzero], 1 - original[nonzero])
        assert_array_equal(flipped[~nonzero], [1, 1])

    def test_nan_rejected(self):
        with self.assertRaises(InvalidInput):
            latent_to_bits(np.array([0.1, np.nan]))

    def test_bit_accuracy(self):
        b = BitMessage([0, 1, 0, 0])
        self.assertEqual(bit_accuracy(b, b), 1.0)
        self.assertEqual(bit_accuracy(b.complement(), b), 0.0)
        self.assertEqual(bit_accuracy(BitMessage([0, 1, 1, 0]), b), 0.75)
        with self.assertRaises(InvalidInput):
            bit_accuracy(BitMessage([0, 1]), b)


class MessageFileTests(SimpleTestCase):

    def test_packed_file_with_sidecar(self):
        msg = BitMessage([1, 0, 1, 1, 0, 0, 0, 1, 1, 1])
        with tempfile.TemporaryDirectory() as tmp:
            path = write_message(msg, Path(tmp) / 'm.bin')
            self.assertEqual(path.read_bytes(), bytes([0b10110001, 0b11000000]))
            self.assertEqual(json.loads((Path(tmp) / 'm.bin.json').read_text()), {'bits': 10})
            assert_array_equal(read_message(path).bits, msg.bits)

    def test_without_sidecar_uses_whole_bytes(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'raw.bin'
            path.write_bytes(b'\xff\x00')
            self.assertEqual(len(read_message(path)), 16)

    def test_sidecar_longer_than_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'm.bin'
            path.write_bytes(b'\x00')
            (Path(tmp) / 'm.bin.json').write_text('{"bits": 12}')
            with self.assertRaises(InvalidInput):
                read_message(path)
