import numpy as np
from django.test import SimpleTestCase, tag

from codec.embedding import bits_to_uniform, embed, uniform_to_latent
from codec.messages import BitMessage, StegoKey, random_message
from codec.normal import inverse_normal_cdf
from core.exceptions import InvalidInput

from .goodness import (
    GoodnessReport, empirical_kl, kl_reference, ks_test_gaussian,
    latent_security_report, suite_pass_rate, uniformity_test,
)
from .serializers import GoodnessReportSerializer


def _embedded(size, seed, mode='random'):
    rng = np.random.default_rng(seed)
    msg = random_message(size, rng)
    return msg, embed(msg, StegoKey(seed), (size, 1, 1), mode=mode)


class GaussianityTests(SimpleTestCase):

    def test_embedded_latents_pass(self):
        passes = [ks_test_gaussian(_embedded(65536, seed)[1]).passed for seed in range(5)]
        self.assertGreaterEqual(sum(passes), 4)

    def test_shifted_gaussian_fails(self):
        x = np.random.default_rng(1).normal(0.2, 1.0, 65536)
        report = ks_test_gaussian(x)
        self.assertLess(report.p_value, 0.001)
        self.assertFalse(report.passed)

    def test_ideal_quantiles(self):
        n = 1000
        x = inverse_normal_cdf((np.arange(1, n + 1) - 0.5) / n)
        self.assertLessEqual(ks_test_gaussian(x).statistic, 0.5 / n + 1e-10)

    def test_batch_of_latents(self):
        batch = [_embedded(64, seed)[1] for seed in range(4)]
        self.assertEqual(ks_test_gaussian(batch).n, 256)

    def test_undersized(self):
        with self.assertRaises(InvalidInput):
            ks_test_gaussian(np.zeros(99))

    def test_p_value_range_enforced(self):
        with self.assertRaises(InvalidInput):
            GoodnessReport(test='x', n=1, statistic=0.0, p_value=1.5)


class EmpiricalKlTests(SimpleTestCase):

    def test_embedded_latents_match_gaussian_floor(self):
        _, z = _embedded(2 ** 20, 7)
        kl = empirical_kl(z, 64)
        self.assertLess(kl, 0.02)
        self.assertLessEqual(kl, 2 * kl_reference(2 ** 20, 64, seed=8))

    def test_ideal_counts_give_zero(self):
        bins = 64
        centers = inverse_normal_cdf((np.arange(bins) + 0.5) / bins)
        self.assertAlmostEqual(empirical_kl(np.repeat(centers, 100), bins), 0.0, places=12)

    def test_wider_gaussian_is_detected(self):
        x = np.random.default_rng(9).normal(0.0, np.sqrt(2.0), 2 ** 20)
        self.assertGreater(empirical_kl(x, 64), 0.1)

    def test_preconditions(self):
        with self.assertRaises(InvalidInput):
            empirical_kl(np.zeros(10_000), 4)
        with self.assertRaises(InvalidInput):
            empirical_kl(np.zeros(6399), 64)

    def test_empty_bins_are_smoothed(self):
        self.assertTrue(np.isfinite(empirical_kl(np.zeros(6400), 64)))


class UniformityTests(SimpleTestCase):

    def test_random_mode_uniforms_pass(self):
        passes = []
        for seed in range(5):
            msg = random_message(100_000, np.random.default_rng(seed))
            report = uniformity_test(bits_to_uniform(msg, StegoKey(seed)), ones_rate=msg.ones_rate())
            self.assertTrue(report.detail['balance_ok'])
            passes.append(report.passed)
        self.assertGreaterEqual(sum(passes), 4)

    def test_midpoint_mode_is_flagged(self):
        msg = random_message(10_000, np.random.default_rng(10))
        report = uniformity_test(bits_to_uniform(msg, StegoKey(0), mode='midpoint'))
        self.assertFalse(report.passed)
        self.assertLess(report.p_value, 1e-10)

    def test_all_zero_message(self):
        msg = BitMessage(np.zeros(5000, dtype=np.uint8))
        s = bits_to_uniform(msg, StegoKey(11))
        self.assertTrue(np.all(s.values < 0.5))
        self.assertFalse(uniformity_test(s, ones_rate=0.5).detail['balance_ok'])
        self.assertTrue(uniformity_test(s, ones_rate=0.0).detail['balance_ok'])

    def test_undersized(self):
        with self.assertRaises(InvalidInput):
            uniformity_test(np.full(999, 0.5))


class SuiteTests(SimpleTestCase):

    def test_latent_report(self):
        msg = random_message(1024, np.random.default_rng(12))
        s = bits_to_uniform(msg, StegoKey(12))
        reports = latent_security_report(uniform_to_latent(s, (4, 16, 16)), s, ones_rate=msg.ones_rate())
        self.assertEqual([r.test for r in reports], ['ks_gaussian', 'empirical_kl', 'ks_uniform'])
        self.assertEqual(reports[1].detail['bins'], 10)

    def test_serializer_keys(self):
        report = ks_test_gaussian(_embedded(1000, 13)[1])
        data = GoodnessReportSerializer(report).data
        self.assertEqual(set(data), {'test', 'n', 'statistic', 'p_value', 'pass', 'detail'})
        self.assertEqual(data['n'], 1000)

    def test_midpoint_never_passes(self):
        rate, reports = suite_pass_rate(runs=3, size=1000, mode='midpoint')
        self.assertEqual(rate, 0.0)
        self.assertEqual(len(reports), 3)

    def test_deterministic(self):
        a, _ = suite_pass_rate(runs=2, size=2000, master_seed=4)
        b, reports = suite_pass_rate(runs=2, size=2000, master_seed=4)
        self.assertEqual(a, b)
        self.assertTrue(all(isinstance(r.statistic, float) for r in reports))

    @tag('slow')
    def test_type_one_calibration(self):
        rate, reports = suite_pass_rate(runs=200, size=65536, alpha=0.01)
        self.assertEqual(len(reports), 200)
        self.assertGreaterEqual(rate, 0.95)

