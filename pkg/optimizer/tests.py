import tempfile
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal
from django.test import SimpleTestCase, tag

from channels.transforms import apply_channel
from codec.embedding import LatentTensor, bit_accuracy, embed, latent_to_bits
from codec.messages import StegoKey, random_message
from core.exceptions import InvalidInput, NumericFailure
from generator.images import ImageTensor
from generator.lipschitz import certified_lipschitz
from generator.network import decode_array, decode_image, denoise, encode_image, invert_denoise, jvp
from generator.params import make_generator

from .config import OptimizerConfig, parse_eta
from .engine import (
    BOUND_INFLATION, extract_with_optimization, refine_checkpoints, refine_latent,
)
from .serializers import BoundReportSerializer
from .trace import TRACE_COLUMNS, verify_trace

LATENT = (4, 16, 16)
IMAGE = (128, 128, 3)


def _stego(params, trial, mode='random'):
    rng = np.random.default_rng(1000 + trial)
    msg = random_message(params.n, rng)
    z_t = embed(msg, StegoKey(trial), params.latent_shape, mode=mode)
    return msg, decode_image(params, denoise(params, z_t))


class ParseEtaTests(SimpleTestCase):

    def test_forms(self):
        self.assertEqual(parse_eta('auto'), ('auto', None))
        self.assertEqual(parse_eta('fixed:1.0'), ('fixed', 1.0))
        self.assertEqual(parse_eta('FIXED:0.25'), ('fixed', 0.25))

    def test_rejects(self):
        for text in ('fixed', 'fixed:', 'fixed:-1', 'fixed:0', 'fixed:abc', 'slow', 'fixed:inf'):
            with self.assertRaises(InvalidInput):
                parse_eta(text)

    def test_config_validation(self):
        with self.assertRaises(InvalidInput):
            OptimizerConfig(steps=-1)
        with self.assertRaises(InvalidInput):
            OptimizerConfig(eta=0.0)
        with self.assertRaises(InvalidInput):
            OptimizerConfig(auto_safety=1.0)
        with self.assertRaises(InvalidInput):
            OptimizerConfig(eta_policy='adam')

    def test_from_settings(self):
        cfg = OptimizerConfig.from_settings(steps=7, eta='fixed:0.5')
        self.assertEqual((cfg.steps, cfg.eta_policy, cfg.eta), (7, 'fixed', 0.5))
        self.assertEqual(cfg.eta_label, 'fixed:0.5')


class RefineLatentTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)

    def test_zero_steps_returns_start(self):
        _, x = _stego(self.params, 0)
        z0 = encode_image(self.params, apply_channel('jpeg_like:70', x))
        z, trace = refine_latent(self.params, z0, x, OptimizerConfig(steps=0))
        assert_array_equal(z.values, z0.values)
        self.assertEqual(len(trace), 0)

    def test_global_minimum_is_fixed_point(self):
        z0 = LatentTensor(np.random.default_rng(1).standard_normal(LATENT))
        x = decode_image(self.params, z0)
        z, trace = refine_latent(self.params, z0, x, OptimizerConfig(steps=10, eta_policy='fixed', eta=0.05))
        assert_array_equal(z.values, z0.values)
        self.assertEqual(trace.column('grad_norm').max(), 0.0)

    def test_grad_tol_stops_early(self):
        z0 = LatentTensor(np.random.default_rng(2).standard_normal(LATENT))
        x = decode_image(self.params, z0)
        cfg = OptimizerConfig(steps=10, eta_policy='fixed', eta=0.05, grad_tol=1e-12)
        z, trace = refine_latent(self.params, z0, x, cfg)
        self.assertEqual(len(trace), 0)
        assert_array_equal(z.values, z0.values)

    def test_shape_mismatch(self):
        with self.assertRaises(InvalidInput):
            refine_latent(self.params, LatentTensor(np.zeros((4, 8, 8))), ImageTensor(np.zeros(IMAGE)), OptimizerConfig(steps=1))
        with self.assertRaises(InvalidInput):
            refine_latent(self.params, LatentTensor(np.zeros(LATENT)), ImageTensor(np.zeros((64, 64, 3))), OptimizerConfig(steps=1))

    def test_step_identity_and_bound(self):
        cfg = OptimizerConfig(steps=100)
        for trial in range(5):
            _, x = _stego(self.params, trial)
            received = apply_channel('jpeg_like:70', x)
            _, trace = refine_latent(self.params, encode_image(self.params, received), received, cfg)
            self.assertEqual(len(trace), 100)
            report = verify_trace(trace, BOUND_INFLATION * certified_lipschitz(self.params), trace.eta)
            self.assertEqual(report.identity_violations, 0)
            self.assertEqual(report.bound_violations, 0)
            self.assertEqual(trace.bound_violations, 0)
            self.assertTrue(report.ok)

    def test_converging_run_shrinks_residual_and_steps(self):
        for trial in range(5):
            _, x = _stego(self.params, trial)
            received = apply_channel('jpeg_like:70', x)
            _, trace = refine_latent(self.params, encode_image(self.params, received), received, OptimizerConfig(steps=100))
            self.assertLess(trace.final_recon, trace.initial_recon)
            steps = trace.column('step_norm')
            self.assertLess(steps[-1], steps[0])

    def test_checkpoints_match_separate_runs(self):
        _, x = _stego(self.params, 3)
        received = apply_channel('jpeg_like:50', x)
        z0 = encode_image(self.params, received)
        cfg = OptimizerConfig(steps=100)
        points, trace = refine_checkpoints(self.params, z0, received, cfg, [10, 0, 25])
        self.assertEqual([p.steps for p in points], [0, 10, 25])
        self.assertEqual(len(trace), 25)
        assert_array_equal(points[0].latent.values, z0.values)
        for point in points[1:]:
            z, _ = refine_latent(self.params, z0, received, cfg.with_steps(point.steps))
            assert_array_equal(point.latent.values, z.values)

    def test_checkpoints_rejected(self):
        z0 = LatentTensor(np.zeros(LATENT))
        with self.assertRaises(InvalidInput):
            refine_checkpoints(self.params, z0, ImageTensor(np.zeros(IMAGE)), OptimizerConfig(), [])

    def test_trace_csv(self):
        _, x = _stego(self.params, 4)
        _, trace = refine_latent(self.params, encode_image(self.params, x), apply_channel('bitdepth:8', x), OptimizerConfig(steps=3))
        with tempfile.TemporaryDirectory() as tmp:
            lines = trace.write_csv(Path(tmp) / 'trace.csv').read_text().splitlines()
        self.assertEqual(lines[0], ','.join(TRACE_COLUMNS))
        self.assertEqual(len(lines), 4)

    def test_bound_report_serializer(self):
        _, x = _stego(self.params, 5)
        received = apply_channel('jpeg_like:90', x)
        _, trace = refine_latent(self.params, encode_image(self.params, received), received, OptimizerConfig(steps=5))
        data = BoundReportSerializer(verify_trace(trace, trace.lipschitz, trace.eta)).data
        self.assertEqual(data['steps'], 5)
        self.assertTrue(data['ok'])

    def test_empty_trace_rejected(self):
        _, trace = refine_latent(self.params, LatentTensor(np.zeros(LATENT)), ImageTensor(np.zeros(IMAGE)), OptimizerConfig(steps=0))
        with self.assertRaises(InvalidInput):
            verify_trace(trace, 1.0, 1.0)

    def test_all_zero_image_still_runs(self):
        extraction = extract_with_optimization(self.params, ImageTensor(np.zeros(IMAGE)), OptimizerConfig(steps=5))
        self.assertEqual(len(extraction.message), self.params.n)


class LinearDecoderTests(SimpleTestCase):
    """With the linear hook D is affine, so descent must land on the least-squares solution."""

    def setUp(self):
        self.params = make_generator(5, (2, 2, 2), (16, 16, 3), hidden=4, linear=True)
        n = self.params.n
        columns = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            columns.append(jvp(self.params, np.zeros((2, 2, 2)), e.reshape(2, 2, 2)).ravel())
        self.A = np.stack(columns, axis=1)
        self.offset = decode_array(self.params, np.zeros((2, 2, 2))).ravel()
        self.x = ImageTensor(np.random.default_rng(6).random((16, 16, 3)))

    def test_converges_to_least_squares(self):
        sigma_max = np.linalg.svd(self.A, compute_uv=False)[0]
        cfg = OptimizerConfig(steps=1000, eta_policy='fixed', eta=1.0 / sigma_max ** 2)
        z, _ = refine_latent(self.params, LatentTensor(np.zeros((2, 2, 2))), self.x, cfg)
        expected = np.linalg.lstsq(self.A, self.x.pixels.ravel() - self.offset, rcond=None)[0]
        self.assertLessEqual(np.linalg.norm(z.flat - expected) / np.linalg.norm(expected), 1e-6)

    def test_auto_step_converges(self):
        z, _ = refine_latent(self.params, LatentTensor(np.zeros((2, 2, 2))), self.x, OptimizerConfig(steps=400))
        expected = np.linalg.lstsq(self.A, self.x.pixels.ravel() - self.offset, rcond=None)[0]
        self.assertLessEqual(np.linalg.norm(z.flat - expected) / np.linalg.norm(expected), 1e-6)

    def test_oversized_fixed_step_records_increases(self):
        _, trace = refine_latent(
            self.params, LatentTensor(np.zeros((2, 2, 2))), self.x,
            OptimizerConfig(steps=5, eta_policy='fixed', eta=1.0),
        )
        self.assertEqual(trace.loss_increases, 5)

    def test_divergence_raises_with_trace(self):
        cfg = OptimizerConfig(steps=1000, eta_policy='fixed', eta=1.0)
        with np.errstate(over='ignore', invalid='ignore'):
            with self.assertRaises(NumericFailure) as ctx:
                refine_latent(self.params, LatentTensor(np.zeros((2, 2, 2))), self.x, cfg)
        self.assertGreater(len(ctx.exception.trace), 0)


class ExtractionTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = make_generator(42, LATENT, IMAGE, hidden=8, alpha=1.0)

    def test_baseline_equals_encoder_pipeline(self):
        _, x = _stego(self.params, 7)
        received = apply_channel('jpeg_like:70', x)
        extraction = extract_with_optimization(self.params, received, OptimizerConfig(steps=0))
        direct = latent_to_bits(invert_denoise(self.params, encode_image(self.params, received)))
        assert_array_equal(extraction.message.bits, direct.bits)

    def test_identity_channel_midpoint(self):
        base, gains = [], []
        for trial in range(50):
            msg, x = _stego(self.params, trial, mode='midpoint')
            base.append(bit_accuracy(extract_with_optimization(self.params, x, OptimizerConfig(steps=0)).message, msg))
            extraction = extract_with_optimization(self.params, x, OptimizerConfig(steps=100))
            gains.append(bit_accuracy(extraction.message, msg) - base[-1])
        self.assertGreaterEqual(min(base), 0.99)
        self.assertGreaterEqual(np.mean(gains), 0.0)

    def test_identity_channel_random_messages(self):
        gains = []
        for trial in range(50):
            msg, x = _stego(self.params, trial)
            z0 = encode_image(self.params, x)
            points, _ = refine_checkpoints(self.params, z0, x, OptimizerConfig(), [0, 100])
            acc = [bit_accuracy(latent_to_bits(invert_denoise(self.params, p.latent)), msg) for p in points]
            gains.append(acc[1] - acc[0])
        self.assertGreaterEqual(np.mean(gains), 0.0)

    def test_heavy_jpeg_beats_chance(self):
        acc = []
        for trial in range(100):
            msg, x = _stego(self.params, trial)
            extraction = extract_with_optimization(self.params, apply_channel('jpeg_like:50', x), OptimizerConfig(steps=100))
            acc.append(bit_accuracy(extraction.message, msg))
        self.assertGreater(np.mean(acc), 0.5)

    @tag('slow')
    def test_bound_over_fifty_runs(self):
        bound = BOUND_INFLATION * certified_lipschitz(self.params)
        for trial in range(50):
            _, x = _stego(self.params, trial)
            received = apply_channel('jpeg_like:50', x)
            _, trace = refine_latent(self.params, encode_image(self.params, received), received, OptimizerConfig(steps=100))
            report = verify_trace(trace, bound, trace.eta)
            self.assertEqual(report.identity_violations, 0)
            self.assertEqual(report.bound_violations, 0)

    @tag('slow')
    def test_refinement_rarely_worse_on_jpeg70(self):
        gains = []
        for trial in range(100):
            msg, x = _stego(self.params, trial)
            received = apply_channel('jpeg_like:70', x)
            z0 = encode_image(self.params, received)
            points, _ = refine_checkpoints(self.params, z0, received, OptimizerConfig(), [0, 100])
            acc = [bit_accuracy(latent_to_bits(invert_denoise(self.params, p.latent)), msg) for p in points]
            gains.append(acc[1] - acc[0])
        gains = np.array(gains)
        self.assertGreaterEqual(int(np.sum(gains >= 0.0)), 90)
        self.assertGreater(gains.mean(), 0.0)
