import dataclasses
import tempfile
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from django.conf import settings
from django.test import SimpleTestCase, override_settings
from scipy import fft

from codec.embedding import LatentTensor, bit_accuracy, embed, latent_to_bits
from codec.messages import StegoKey, random_message
from core.exceptions import InvalidInput

from .images import ImageTensor, read_image, read_raw, write_image, write_raw
from .lipschitz import certified_lipschitz, estimate_lipschitz, sampled_lipschitz
from .network import (
    Linearization, decode_array, decode_image, denoise, encode_image, invert_denoise,
    jvp, loss_and_gradient, vjp,
)
from .params import GOLDEN_FIXTURE, default_generator, golden_generator, make_generator, texture_band

LATENT = (4, 16, 16)
IMAGE = (128, 128, 3)


def _gaussian_latent(params, rng):
    return LatentTensor(rng.standard_normal(params.latent_shape))


def _dense_jacobian(params, z):
    n = params.n
    columns = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        columns.append(jvp(params, z, e.reshape(params.latent_shape)).ravel())
    return np.stack(columns, axis=1)


class MakeGeneratorTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)

    def test_shapes_accepted(self):
        self.assertEqual(self.params.factor, 8)
        self.assertEqual(self.params.block, 192)

    def test_incompatible_shapes_rejected(self):
        with self.assertRaises(InvalidInput):
            make_generator(1, LATENT, (100, 128, 3))
        with self.assertRaises(InvalidInput):
            make_generator(1, LATENT, (128, 64, 3))
        with self.assertRaises(InvalidInput):
            make_generator(1, LATENT, IMAGE, hidden=2)

    def test_width_and_blend_limits(self):
        # k = 8 leaves 10 band frequencies per channel
        self.assertEqual(int(texture_band(8).sum()), 10)
        make_generator(1, LATENT, IMAGE, hidden=30)
        for bad in ({'hidden': 31}, {'blend': 0.5}, {'blend': -0.01}, {'alpha': 0.0}):
            with self.assertRaises(InvalidInput, msg=bad):
                make_generator(1, LATENT, IMAGE, **bad)

    def test_textures_are_band_limited(self):
        p = self.params
        spectra = fft.dctn(np.column_stack([p.w2, p.b2]).reshape(8, 8, 3, -1), axes=(0, 1), norm='ortho')
        self.assertLessEqual(np.max(np.abs(spectra[~texture_band(8)])), 1e-12)
        self.assertGreater(np.max(np.abs(spectra[texture_band(8)])), 1.0)

    def test_mixing_is_orthogonal(self):
        q = self.params.mixing
        self.assertLessEqual(np.max(np.abs(q @ q.T - np.eye(q.shape[0]))), 1e-10)

    def test_same_seed_same_image(self):
        other = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)
        z = _gaussian_latent(self.params, np.random.default_rng(0))
        assert_array_equal(decode_image(self.params, z).pixels, decode_image(other, z).pixels)

    def test_different_seeds_differ(self):
        one = make_generator(1, LATENT, IMAGE, hidden=8, alpha=1.0)
        two = make_generator(2, LATENT, IMAGE, hidden=8, alpha=1.0)
        z = _gaussian_latent(one, np.random.default_rng(0))
        diff = np.abs(decode_image(one, z).pixels - decode_image(two, z).pixels) > 1e-9
        self.assertGreaterEqual(diff.mean(), 0.01)

    def test_default_generator_reads_settings(self):
        stego = {**settings.STEGO, 'GENERATOR_SEED': 42, 'LATENT_SHAPE': '4,16,16',
                 'IMAGE_SHAPE': '128,128,3', 'HIDDEN_WIDTH': 8, 'ACTIVATION_SCALE': 1.0}
        with override_settings(STEGO=stego):
            params = default_generator()
            small = default_generator(seed=3, latent_shape='1,2,2', image_shape='16,16,3', hidden=4)
        z = _gaussian_latent(self.params, np.random.default_rng(1))
        assert_array_equal(decode_image(params, z).pixels, decode_image(self.params, z).pixels)
        self.assertEqual(small.latent_shape, (1, 2, 2))
        self.assertEqual(small.seed, 3)


class DenoiserTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            z = _gaussian_latent(self.params, rng)
            back = invert_denoise(self.params, denoise(self.params, z))
            self.assertLessEqual(np.max(np.abs(back.values - z.values)), 1e-10)
            again = denoise(self.params, invert_denoise(self.params, z))
            self.assertLessEqual(np.max(np.abs(again.values - z.values)), 1e-10)

    def test_zero_maps_to_bias(self):
        zero = LatentTensor(np.zeros(LATENT))
        bias = denoise(self.params, zero)
        assert_allclose(bias.flat, self.params.mixing_bias, atol=1e-15)
        assert_allclose(invert_denoise(self.params, bias).flat, 0.0, atol=1e-12)

    def test_preserves_gaussian_covariance(self):
        small = make_generator(9, (1, 2, 2), (16, 16, 3), hidden=4, alpha=1.0)
        rng = np.random.default_rng(2)
        samples = np.stack([
            denoise(small, LatentTensor(rng.standard_normal((1, 2, 2)))).flat - small.mixing_bias
            for _ in range(10_000)
        ])
        cov = np.cov(samples, rowvar=False)
        self.assertLessEqual(np.linalg.norm(cov - np.eye(4), 2), 0.1)

    def test_shape_mismatch(self):
        with self.assertRaises(InvalidInput):
            denoise(self.params, LatentTensor(np.zeros((4, 8, 8))))


class DecoderTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)

    def test_output_range(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            x = decode_image(self.params, LatentTensor(3.0 * rng.standard_normal(LATENT))).pixels
            self.assertTrue(np.all((x >= 0.0) & (x <= 1.0)))

    def test_golden_zero_latent(self):
        if not GOLDEN_FIXTURE.exists():
            self.fail(f"{GOLDEN_FIXTURE} is missing; create it once with `python manage.py golden` and commit it")
        x = decode_image(golden_generator(), LatentTensor(np.zeros(LATENT))).pixels
        assert_allclose(x, np.load(GOLDEN_FIXTURE), rtol=0, atol=1e-9)

    def test_zero_latent_tiles_one_block(self):
        # every cell sees u = b1, so the blend has nothing to mix
        p = self.params
        block = 1.0 / (1.0 + np.exp(-(p.w2 @ (p.alpha * np.tanh(p.b1 / p.alpha)) + p.b2)))
        x = decode_image(p, LatentTensor(np.zeros(LATENT))).pixels
        tiles = x.reshape(16, 8, 16, 8, 3).transpose(0, 2, 1, 3, 4).reshape(256, -1)
        assert_allclose(tiles, np.broadcast_to(block, tiles.shape), rtol=0, atol=1e-12)

    def test_local_lipschitz(self):
        estimate = estimate_lipschitz(self.params, probes=4, iters=200)
        bound = certified_lipschitz(self.params)
        self.assertLessEqual(estimate.value, bound * (1 + 1e-9))
        rng = np.random.default_rng(4)
        for _ in range(100):
            z = self.params.mixing_bias.reshape(LATENT) + rng.standard_normal(LATENT)
            delta = rng.standard_normal(LATENT)
            delta *= 1e-3 / np.linalg.norm(delta)
            change = np.linalg.norm(decode_array(self.params, z + delta) - decode_array(self.params, z))
            self.assertLessEqual(change, 1.01 * estimate.value * 1e-3)


class EncoderTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)

    def test_left_inverse_on_range(self):
        rng = np.random.default_rng(5)
        errors = []
        for _ in range(100):
            z = _gaussian_latent(self.params, rng)
            back = encode_image(self.params, decode_image(self.params, z))
            errors.append(np.linalg.norm(back.values - z.values) / np.linalg.norm(z.values))
        self.assertLessEqual(np.median(errors), 0.05)

    def test_exact_without_blend(self):
        flat = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0, blend=0.0)
        rng = np.random.default_rng(16)
        for _ in range(10):
            z = _gaussian_latent(flat, rng)
            back = encode_image(flat, decode_image(flat, z))
            self.assertLessEqual(np.linalg.norm(back.values - z.values) / np.linalg.norm(z.values), 1e-8)

    def test_blend_leaves_a_bias_for_refinement(self):
        rng = np.random.default_rng(17)
        errors = []
        for _ in range(20):
            z = _gaussian_latent(self.params, rng)
            back = encode_image(self.params, decode_image(self.params, z))
            errors.append(np.linalg.norm(back.values - z.values) / np.linalg.norm(z.values))
        self.assertGreater(min(errors), 1e-3)
        self.assertLess(max(errors), 0.1)

    def test_mid_gray_is_finite(self):
        z = encode_image(self.params, ImageTensor(np.full(IMAGE, 0.5)))
        self.assertTrue(np.isfinite(z.values).all())

    def test_out_of_range_pixels_are_clamped(self):
        z = encode_image(self.params, ImageTensor(np.full(IMAGE, 1.5)))
        self.assertTrue(np.isfinite(z.values).all())

    def test_end_to_end_threshold_decoding(self):
        rng = np.random.default_rng(6)
        for trial in range(50):
            msg = random_message(self.params.n, rng)
            z_t = embed(msg, StegoKey(trial), LATENT, mode='midpoint')
            image = decode_image(self.params, denoise(self.params, z_t))
            recovered = invert_denoise(self.params, encode_image(self.params, image))
            self.assertGreaterEqual(bit_accuracy(latent_to_bits(recovered), msg), 0.99)


class GradientTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)

    def test_zero_at_global_minimum(self):
        z = _gaussian_latent(self.params, np.random.default_rng(7))
        loss, grad = loss_and_gradient(self.params, z, decode_image(self.params, z))
        self.assertEqual(loss, 0.0)
        assert_array_equal(grad.values, 0.0)

    def test_matches_central_differences(self):
        rng = np.random.default_rng(8)
        z = _gaussian_latent(self.params, rng).values
        target = decode_image(self.params, _gaussian_latent(self.params, rng))
        _, grad = loss_and_gradient(self.params, z, target)
        coords = rng.choice(z.size, size=20, replace=False)
        h = 1e-5
        numeric = []
        for i in coords:
            e = np.zeros(z.size)
            e[i] = h
            e = e.reshape(LATENT)
            plus, _ = loss_and_gradient(self.params, z + e, target)
            minus, _ = loss_and_gradient(self.params, z - e, target)
            numeric.append((plus - minus) / (2 * h))
        analytic = grad.flat[coords]
        numeric = np.array(numeric)
        self.assertLessEqual(np.linalg.norm(numeric - analytic) / np.linalg.norm(analytic), 1e-5)

    def test_loss_non_negative(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            loss, _ = loss_and_gradient(
                self.params, _gaussian_latent(self.params, rng), ImageTensor(rng.random(IMAGE))
            )
            self.assertGreaterEqual(loss, 0.0)


class LinearizationTests(SimpleTestCase):

    def test_products_are_adjoint(self):
        params = make_generator(3, LATENT, IMAGE, hidden=8, alpha=1.0)
        rng = np.random.default_rng(14)
        z = rng.standard_normal(LATENT)
        v = rng.standard_normal(LATENT)
        r = rng.standard_normal(IMAGE)
        lhs = np.vdot(jvp(params, z, v), r)
        rhs = np.vdot(v, vjp(params, z, r))
        self.assertAlmostEqual(lhs / rhs, 1.0, places=10)

    def test_cached_matches_fresh(self):
        params = make_generator(3, LATENT, IMAGE, hidden=8, alpha=1.0)
        rng = np.random.default_rng(15)
        z = rng.standard_normal(LATENT)
        v = rng.standard_normal(LATENT)
        lin = Linearization(params, z)
        assert_array_equal(lin.jvp(v), jvp(params, z, v))


class LipschitzTests(SimpleTestCase):

    def setUp(self):
        self.tiny = make_generator(11, (1, 2, 2), (16, 16, 3), hidden=4, alpha=1.0)

    def test_identity_path_against_dense_svd(self):
        w1 = np.zeros((4, 1))
        w1[0, 0] = -3.0
        w2 = np.zeros((self.tiny.block, 4))
        w2[0, 0] = 1.0
        path = dataclasses.replace(
            self.tiny, w1=w1, b1=np.zeros(4), w2=w2, b2=np.zeros(self.tiny.block), blend=0.0
        )
        z = np.zeros((1, 2, 2))
        estimate = estimate_lipschitz(path, probes=0, iters=50, at=[z])
        dense = np.linalg.svd(_dense_jacobian(path, z), compute_uv=False)[0]
        self.assertAlmostEqual(dense, 0.75, places=12)
        self.assertAlmostEqual(estimate.value, 0.75, places=9)
        self.assertTrue(estimate.converged)

    def test_random_tiny_against_dense_svd(self):
        z = np.random.default_rng(10).standard_normal((1, 2, 2))
        estimate = estimate_lipschitz(self.tiny, probes=0, iters=5000, at=[z], tol=1e-13)
        dense = np.linalg.svd(_dense_jacobian(self.tiny, z), compute_uv=False)[0]
        self.assertAlmostEqual(estimate.value / dense, 1.0, places=6)

    def test_bounds_finite_differences(self):
        estimate = estimate_lipschitz(self.tiny, probes=3, iters=500)
        rng = np.random.default_rng(12)
        z = self.tiny.mixing_bias.reshape(1, 2, 2) + rng.standard_normal((1, 2, 2))
        for _ in range(20):
            delta = 1e-6 * rng.standard_normal((1, 2, 2))
            ratio = np.linalg.norm(decode_array(self.tiny, z + delta) - decode_array(self.tiny, z)) / np.linalg.norm(delta)
            self.assertLessEqual(ratio, certified_lipschitz(self.tiny) + 1e-6)
        self.assertGreater(estimate.value, 0.0)

    def test_deterministic(self):
        a = estimate_lipschitz(self.tiny, probes=2, iters=100, seed=3)
        b = estimate_lipschitz(self.tiny, probes=2, iters=100, seed=3)
        self.assertEqual(a.value, b.value)

    def test_sampled_estimate_is_shared_and_converged(self):
        params = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)
        first = sampled_lipschitz(params, 4)
        self.assertIs(sampled_lipschitz(params, 4), first)
        self.assertTrue(first.converged)
        self.assertLessEqual(first.residual, 1e-6)
        self.assertLessEqual(first.value, certified_lipschitz(params))

    def test_argument_checks(self):
        with self.assertRaises(InvalidInput):
            estimate_lipschitz(self.tiny, probes=0)
        with self.assertRaises(InvalidInput):
            estimate_lipschitz(self.tiny, probes=1, iters=5)


class ImageFileTests(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(13)
        self.image = ImageTensor(rng.random((16, 16, 3)))

    def test_raw_round_trip_is_float32_exact(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_raw(self.image, Path(tmp) / 'x.f32', seed=5)
            back, header = read_raw(path)
            assert_array_equal(back.pixels, self.image.pixels.astype(np.float32).astype(float))
            self.assertEqual(header['seed'], 5)
            self.assertEqual(header['shape'], [16, 16, 3])

    def test_truncated_raw_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_raw(self.image, Path(tmp) / 'x.f32')
            path.write_bytes(path.read_bytes()[:-10])
            with self.assertRaises(InvalidInput):
                read_raw(path)

    def test_ppm_round_trip_within_half_level(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_image(self.image, Path(tmp) / 'x.ppm')
            back, header = read_image(path)
            self.assertEqual(header, {})
            self.assertLessEqual(np.max(np.abs(back.pixels - self.image.pixels)), 1 / 510 + 1e-12)

    def test_pgm_single_channel(self):
        gray = ImageTensor(self.image.pixels[:, :, :1])
        with tempfile.TemporaryDirectory() as tmp:
            back, _ = read_image(write_image(gray, Path(tmp) / 'x.pgm'))
            self.assertEqual(back.shape, (16, 16, 1))

    def test_garbage_ppm_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'x.ppm'
            path.write_bytes(b'P6\n16 16\n255\n' + b'\x00' * 10)
            with self.assertRaises(InvalidInput):
                read_image(path)
