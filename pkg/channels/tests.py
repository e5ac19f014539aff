import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from django.test import SimpleTestCase

from codec.embedding import LatentTensor
from core.exceptions import InvalidInput
from generator.images import ImageTensor
from generator.network import decode_image
from generator.params import make_generator

from .quant import LUMINANCE_BASE, QuantTable, quality_to_table
from .transforms import (
    ChannelConfig, apply_channel, channel_severity_order, parse_channel, severity_rank,
)


def _mse(a, b):
    return float(np.mean((a.pixels - b.pixels) ** 2))


class QuantTableTests(SimpleTestCase):

    def test_quality_50_is_base(self):
        assert_array_equal(quality_to_table(50).entries, LUMINANCE_BASE)

    def test_quality_100_is_all_ones(self):
        assert_array_equal(quality_to_table(100).entries, np.ones((8, 8)))

    def test_quality_10_is_five_times_base(self):
        assert_array_equal(quality_to_table(10).entries, 5 * LUMINANCE_BASE)

    def test_quality_30_uses_exact_scale(self):
        table = quality_to_table(30)
        assert_array_equal(table.entries, np.floor(LUMINANCE_BASE * (5000 / 30) / 100 + 0.5))
        # a truncated integer scale of 166 would give 164 here
        self.assertEqual(table.entries[7, 7], 165)

    def test_entries_at_least_one(self):
        for q in range(1, 101):
            self.assertGreaterEqual(quality_to_table(q).entries.min(), 1)

    def test_out_of_range(self):
        for q in (0, 101, -5, 2.5, True):
            with self.assertRaises(InvalidInput):
                quality_to_table(q)

    def test_rejects_zero_entries(self):
        with self.assertRaises(InvalidInput):
            QuantTable(np.zeros((8, 8)))


class ChannelConfigTests(SimpleTestCase):

    def test_labels_round_trip(self):
        for label in ('identity', 'float16', 'bitdepth:8', 'jpeg_like:70'):
            self.assertEqual(parse_channel(label).label, label)

    def test_aliases(self):
        self.assertEqual(parse_channel('float16_roundtrip').label, 'float16')
        self.assertEqual(parse_channel('JPEG:50').label, 'jpeg_like:50')

    def test_invalid(self):
        for label in ('gzip', 'bitdepth:0', 'bitdepth:17', 'jpeg_like:0', 'jpeg_like:abc', 'identity:3'):
            with self.assertRaises(InvalidInput):
                parse_channel(label)

    def test_severity_order(self):
        order = channel_severity_order()
        self.assertEqual(len(order), 6)
        self.assertEqual(order[0], ChannelConfig('identity'))
        self.assertEqual(
            [c.label for c in order],
            ['identity', 'float16', 'bitdepth:8', 'jpeg_like:90', 'jpeg_like:70', 'jpeg_like:50'],
        )
        self.assertEqual(severity_rank(parse_channel('jpeg_like:70')), 4)
        self.assertEqual(severity_rank(parse_channel('jpeg_like:20')), 6)


class ApplyChannelTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        params = make_generator(42, (4, 16, 16), (128, 128, 3), hidden=8, alpha=1.0)
        rng = np.random.default_rng(0)
        cls.images = [
            decode_image(params, LatentTensor(rng.standard_normal((4, 16, 16))))
            for _ in range(20)
        ]

    def test_identity_is_exact(self):
        x = self.images[0]
        assert_array_equal(apply_channel('identity', x).pixels, x.pixels)

    def test_float16_rounding(self):
        x = self.images[0]
        out = apply_channel('float16', x).pixels
        assert_array_equal(out, x.pixels.astype(np.float16).astype(float))
        self.assertLessEqual(np.max(np.abs(out - x.pixels)), 2.0 ** -12)

    def test_bitdepth_on_mid_gray(self):
        x = ImageTensor(np.full((8, 8, 3), 0.5))
        out = apply_channel('bitdepth:8', x).pixels
        self.assertLessEqual(np.max(np.abs(out - 0.5)), 1 / 510)
        self.assertEqual(np.unique(out).size, 1)

    def test_bitdepth_is_idempotent(self):
        for bits in (1, 4, 8, 16):
            once = apply_channel(f'bitdepth:{bits}', self.images[1])
            twice = apply_channel(f'bitdepth:{bits}', once)
            assert_array_equal(once.pixels, twice.pixels)

    def test_deterministic(self):
        for cfg in channel_severity_order():
            a = apply_channel(cfg, self.images[2])
            b = apply_channel(cfg, self.images[2])
            assert_array_equal(a.pixels, b.pixels)

    def test_dct_without_quantization_is_identity(self):
        x = self.images[3]
        out = apply_channel('jpeg_like:100', x, rounding=False, table=quality_to_table(100))
        assert_allclose(out.pixels, x.pixels, rtol=0, atol=1e-9)
        out = apply_channel('jpeg_like:10', x, rounding=False)
        assert_allclose(out.pixels, x.pixels, rtol=0, atol=1e-9)

    def test_jpeg_error_bound(self):
        # each coefficient moves by at most q/2 and every 8x8 DCT basis entry is at most 1/4
        rng = np.random.default_rng(1)
        x = ImageTensor(rng.random((8 * 25, 8 * 40, 1)))
        for q in (90, 50, 10):
            table = quality_to_table(q)
            out = apply_channel(f'jpeg_like:{q}', x)
            bound = 64 * 0.25 * 0.5 * table.largest / 255.0
            self.assertLessEqual(np.max(np.abs(out.pixels - x.pixels)), bound)

    def test_output_in_unit_range(self):
        for cfg in channel_severity_order():
            out = apply_channel(cfg, self.images[4]).pixels
            self.assertTrue(np.all((out >= 0.0) & (out <= 1.0)))

    def test_jpeg_needs_multiple_of_eight(self):
        with self.assertRaises(InvalidInput):
            apply_channel('jpeg_like:70', ImageTensor(np.zeros((12, 16, 3))))

    def test_error_grows_along_severity_order(self):
        mse = [
            np.mean([_mse(apply_channel(cfg, x), x) for x in self.images])
            for cfg in channel_severity_order()
        ]
        self.assertEqual(mse[0], 0.0)
        self.assertLessEqual(mse[1], mse[2])
        self.assertLess(mse[2], mse[3])
        self.assertLess(mse[3], mse[4])
        self.assertLess(mse[4], mse[5])
