import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from channels.transforms import channel_severity_order
from codec.embedding import LatentTensor
from codec.messages import BitMessage, random_message, read_message, write_message
from core.exceptions import InvalidInput
from generator.images import read_image
from generator.network import decode_image
from generator.params import golden_generator
from optimizer.config import OptimizerConfig

from .experiments import (
    RESULT_COLUMNS, build_spec, optimizer_hash, run_crossmodel, run_experiment, run_trial, sign_test_pvalue,
)
from .models import ExperimentRun, ResultRow
from .spec import ExperimentSpec

N_BITS = 1024


def quiet(*args, **kwargs):
    kwargs.setdefault('stdout', StringIO())
    return call_command(*args, **kwargs)


class SpecTests(SimpleTestCase):

    def test_defaults(self):
        spec = build_spec()
        self.assertEqual([c.label for c in spec.channels], [c.label for c in channel_severity_order()])
        self.assertEqual(spec.steps, [0, 100])
        ablation = build_spec('ablate')
        self.assertEqual(ablation.steps, [0, 50, 80, 100, 110])
        self.assertEqual([c.label for c in ablation.channels], ['jpeg_like:70'])

    def test_steps_sorted_and_unique(self):
        self.assertEqual(build_spec(steps=[100, 0, 50, 50]).steps, [0, 50, 100])
        self.assertEqual(build_spec(steps=[30]).checkpoints, [0, 30])

    def test_invalid_specs(self):
        for overrides in (
            {'trials': 0}, {'channels': []}, {'steps': []}, {'steps': [-1]},
            {'channels': ['gzip']}, {'mode': 'loud'}, {'eta': 'fixed:-1'},
            {'image_shape': '100,128,3'}, {'latent_shape': '4,16'},
        ):
            with self.assertRaises(InvalidInput, msg=overrides):
                build_spec(**overrides)

    def test_dataclass_guards(self):
        with self.assertRaises(InvalidInput):
            ExperimentSpec(
                generator_seed=1, hidden=8, latent_shape='4,16,16', image_shape='128,128,3',
                channels=['identity'], steps=[0], trials=0, mode='random', master_seed=0,
            )

    def test_sign_test(self):
        self.assertAlmostEqual(sign_test_pvalue(np.full(10, 0.01)), 0.5 ** 10)
        self.assertEqual(sign_test_pvalue(np.zeros(10)), 1.0)
        self.assertGreater(sign_test_pvalue(np.array([-0.1, -0.2, 0.1])), 0.5)

    def test_optimizer_hash_tracks_config(self):
        a = optimizer_hash(OptimizerConfig(steps=100))
        self.assertEqual(a, optimizer_hash(OptimizerConfig(steps=100)))
        self.assertNotEqual(a, optimizer_hash(OptimizerConfig(steps=100, eta_policy='fixed', eta=1.0)))
        self.assertEqual(len(a), 64)


class ExperimentTests(SimpleTestCase):

    def test_single_lossless_midpoint_trial(self):
        table = run_experiment(build_spec(channels=['identity'], steps=[0], trials=1, mode='midpoint'))
        self.assertEqual(len(table.rows), 1)
        row = table.rows[0]
        self.assertEqual(row.mean_accuracy, 1.0)
        self.assertEqual(row.trials, 1)

    def test_rows_follow_severity_and_pairing(self):
        spec = build_spec(channels=['jpeg_like:50', 'identity', 'bitdepth:8'], steps=[5, 0], trials=2)
        table = run_experiment(spec)
        self.assertEqual(
            [(r.channel, r.steps) for r in table.rows],
            [('identity', 0), ('identity', 5), ('bitdepth:8', 0), ('bitdepth:8', 5),
             ('jpeg_like:50', 0), ('jpeg_like:50', 5)],
        )
        for r in table.rows:
            self.assertTrue(0.0 <= r.mean_accuracy <= 1.0)
            if r.steps == 0:
                self.assertEqual(r.mean_gain, 0.0)
                self.assertEqual(r.gain_pvalue, 1.0)
        self.assertEqual(set(table.traces), {'identity', 'bitdepth:8', 'jpeg_like:50'})
        self.assertEqual(len(table.traces['jpeg_like:50']), 5)

    def test_workers_do_not_change_results(self):
        one = run_experiment(build_spec(channels=['jpeg_like:70'], steps=[0, 3], trials=3, workers=1))
        three = run_experiment(build_spec(channels=['jpeg_like:70'], steps=[0, 3], trials=3, workers=3))
        self.assertEqual(
            [(r.mean_accuracy, r.mean_recon) for r in one.rows],
            [(r.mean_accuracy, r.mean_recon) for r in three.rows],
        )

    def test_crossmodel_uses_one_optimizer(self):
        spec = build_spec('crossmodel', channels=['identity'], steps=[0, 2], trials=1)
        primary, second, summary = run_crossmodel(spec, 4242, 12)
        self.assertTrue(summary['hashes_identical'])
        self.assertEqual(primary.optimizer_hash, second.optimizer_hash)
        self.assertNotEqual(primary.generator['seed'], second.generator['seed'])
        self.assertEqual(second.generator['hidden'], 12)
        self.assertEqual([c['channel'] for c in summary['channels']], ['identity'])


class EmbedExtractCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.msg = random_message(N_BITS, np.random.default_rng(0))
        self.msg_path = write_message(self.msg, self.dir / 'msg.bin')

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_lossless(self):
        image = self.dir / 'stego.f32'
        quiet('embed', message=str(self.msg_path), key=7, mode='midpoint', out=str(image))
        sidecar = json.loads((self.dir / 'stego.f32.json').read_text())
        self.assertEqual(sidecar['bits'], N_BITS)
        self.assertEqual(sidecar['mode'], 'midpoint')

        out = self.dir / 'recovered'
        quiet('extract', image=str(image), steps=0, out=str(out), reference=str(self.msg_path))
        recovered = read_message(out / 'message.bin')
        np.testing.assert_array_equal(recovered.bits, self.msg.bits)
        report = json.loads((out / 'report.json').read_text())
        self.assertEqual(report['accuracy'], 1.0)
        self.assertIsNone(report['bound'])
        self.assertTrue((out / 'trace.csv').exists())

    def test_extract_with_steps_writes_bound_report(self):
        image = self.dir / 'stego.f32'
        quiet('embed', message=str(self.msg_path), key=7, out=str(image))
        degraded = self.dir / 'degraded.f32'
        quiet('attack', image=str(image), channel='jpeg_like:70', out=str(degraded))
        _, header = read_image(degraded)
        self.assertEqual(header['channel'], 'jpeg_like:70')

        out = self.dir / 'recovered'
        quiet('extract', image=str(degraded), steps=5, eta='auto', out=str(out))
        report = json.loads((out / 'report.json').read_text())
        self.assertEqual(report['bound']['steps'], 5)
        self.assertEqual(report['bound']['identity_violations'], 0)
        self.assertEqual(report['bound']['bound_violations'], 0)
        lines = (out / 'trace.csv').read_text().splitlines()
        self.assertEqual(len(lines), 6)

    def test_embedding_is_deterministic(self):
        a, b = self.dir / 'a.f32', self.dir / 'b.f32'
        quiet('embed', message=str(self.msg_path), key=11, out=str(a))
        quiet('embed', message=str(self.msg_path), key=11, out=str(b))
        self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_ppm_output(self):
        image = self.dir / 'stego.ppm'
        quiet('embed', message=str(self.msg_path), key=3, mode='midpoint', out=str(image))
        pixels, header = read_image(image)
        self.assertEqual(pixels.shape, (128, 128, 3))
        self.assertEqual(header, {})

    def test_message_length_must_match(self):
        long_msg = write_message(BitMessage(np.ones(N_BITS + 1, dtype=np.uint8)), self.dir / 'long.bin')
        with self.assertRaises(CommandError) as ctx:
            quiet('embed', message=str(long_msg), key=1, out=str(self.dir / 'x.f32'))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse((self.dir / 'x.f32').exists())

    def test_truncated_image_leaves_no_output(self):
        image = self.dir / 'stego.f32'
        quiet('embed', message=str(self.msg_path), key=7, out=str(image))
        image.write_bytes(image.read_bytes()[:1000])
        out = self.dir / 'recovered'
        with self.assertRaises(CommandError) as ctx:
            quiet('extract', image=str(image), steps=0, out=str(out))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse(out.exists())

    def test_shape_mismatch(self):
        small = write_message(random_message(256, np.random.default_rng(1)), self.dir / 'small.bin')
        image = self.dir / 'small.f32'
        quiet('embed', message=str(small), key=1, latent_shape='4,8,8', image_shape='64,64,3', out=str(image))
        with self.assertRaises(CommandError) as ctx:
            quiet('extract', image=str(image), steps=0, out=str(self.dir / 'recovered'))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_golden_writes_fixture_once(self):
        target = self.dir / 'fixtures' / 'golden.npy'
        with mock.patch('harness.management.commands.golden.GOLDEN_FIXTURE', target):
            quiet('golden')
            written = np.load(target)
            out = StringIO()
            call_command('golden', stdout=out)
        self.assertIn('already present', out.getvalue())
        params = golden_generator()
        expected = decode_image(params, LatentTensor(np.zeros(params.latent_shape))).pixels
        np.testing.assert_array_equal(written, expected)

    def test_unknown_channel(self):
        image = self.dir / 'stego.f32'
        quiet('embed', message=str(self.msg_path), key=7, out=str(image))
        with self.assertRaises(CommandError) as ctx:
            quiet('attack', image=str(image), channel='gif', out=str(self.dir / 'y.f32'))
        self.assertEqual(ctx.exception.returncode, 2)


class BenchCommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_results_are_byte_identical(self):
        options = dict(channel=['identity', 'jpeg_like:50'], steps=[0, 4], trials=2, master_seed=3, no_ledger=True)
        quiet('bench', out=str(self.dir / 'a'), **options)
        quiet('bench', out=str(self.dir / 'b'), **options)
        for name in ('results.csv', 'results.json', 'traces/jpeg_like_50.csv'):
            self.assertEqual((self.dir / 'a' / name).read_bytes(), (self.dir / 'b' / name).read_bytes())
        header = (self.dir / 'a' / 'results.csv').read_text().splitlines()[0]
        self.assertEqual(header, ','.join(RESULT_COLUMNS))
        data = json.loads((self.dir / 'a' / 'results.json').read_text())
        self.assertEqual(data['schema_version'], 1)
        self.assertEqual(len(data['rows']), 4)

    def test_run_is_recorded(self):
        quiet('bench', channel=['bitdepth:8'], steps=[0, 2], trials=1, out=str(self.dir / 'run'))
        run = ExperimentRun.objects.get()
        self.assertEqual(run.kind, 'bench')
        self.assertEqual(run.channels, ['bitdepth:8'])
        self.assertEqual(run.rows.count(), 2)
        self.assertEqual(ResultRow.objects.filter(channel='bitdepth:8', steps=2).count(), 1)

    def test_runs_lists_the_ledger(self):
        quiet('bench', channel=['bitdepth:8'], steps=[0, 2], trials=1, out=str(self.dir / 'run'))
        quiet('ablate', trials=1, steps=[0, 2], out=str(self.dir / 'ablate'))
        out = StringIO()
        call_command('runs', kind='bench', stdout=out)
        data = json.loads(out.getvalue())
        self.assertEqual(len(data), 1)
        self.assertEqual(data[0]['kind'], 'bench')
        self.assertEqual(data[0]['channels'], ['bitdepth:8'])
        self.assertEqual([(r['channel'], r['steps']) for r in data[0]['rows']], [('bitdepth:8', 0), ('bitdepth:8', 2)])
        out = StringIO()
        call_command('runs', limit=5, stdout=out)
        self.assertEqual(sorted(r['kind'] for r in json.loads(out.getvalue())), ['ablate', 'bench'])

    def test_ablate_defaults(self):
        quiet('ablate', trials=1, steps=[0, 2], out=str(self.dir / 'ablate'))
        run = ExperimentRun.objects.get()
        self.assertEqual(run.kind, 'ablate')
        self.assertEqual(run.channels, ['jpeg_like:70'])

    def test_crossmodel_outputs(self):
        quiet('crossmodel', channel=['identity'], steps=[0, 2], trials=1, out=str(self.dir / 'cm'))
        summary = json.loads((self.dir / 'cm' / 'crossmodel.json').read_text())
        self.assertTrue(summary['hashes_identical'])
        self.assertTrue((self.dir / 'cm' / 'primary' / 'results.csv').exists())
        self.assertTrue((self.dir / 'cm' / 'second' / 'results.csv').exists())
        self.assertEqual(ExperimentRun.objects.filter(kind='crossmodel').count(), 2)

    def test_invalid_spec_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            quiet('bench', trials=0, out=str(self.dir / 'bad'), no_ledger=True)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse((self.dir / 'bad').exists())

    def test_security_command(self):
        quiet('security', runs=3, size=2000, out=str(self.dir / 'sec'))
        report = json.loads((self.dir / 'sec' / 'security.json').read_text())
        self.assertEqual([r['test'] for r in report['suite']], ['ks_gaussian', 'empirical_kl', 'ks_uniform'])
        self.assertEqual(len(report['runs']), 3)
        self.assertTrue(0.0 <= report['pass_rate'] <= 1.0)


@tag('slow')
class MonteCarloTrendTests(SimpleTestCase):
    """Full-size paired runs; minutes each."""

    def test_robustness_follows_severity(self):
        table = run_experiment(build_spec(steps=[0, 100], trials=100))
        acc = [table.row(c, 100).mean_accuracy for c in channel_severity_order()]
        self.assertLessEqual(max(acc[3:]), min(acc[:3]))
        self.assertGreaterEqual(acc[3], acc[4])
        self.assertGreaterEqual(acc[4], acc[5])
        for channel in channel_severity_order()[1:]:
            row = table.row(channel, 100)
            self.assertGreater(row.mean_gain, 0.0)
            self.assertLess(row.gain_pvalue, 0.05)

    def test_gain_saturates(self):
        table = run_experiment(build_spec('ablate', trials=100))
        gain = table.gains('jpeg_like:70')
        self.assertGreaterEqual(gain[100], gain[50])
        self.assertLessEqual(gain[110] - gain[100], 0.5 * (gain[80] - gain[50]))

    def test_second_generator_gains(self):
        spec = build_spec('crossmodel', steps=[0, 100], trials=100)
        _, second, summary = run_crossmodel(spec, 4242, 12)
        self.assertTrue(summary['hashes_identical'])
        self.assertGreaterEqual(second.row('identity', 100).mean_gain, 0.0)
        for channel in channel_severity_order()[1:]:
            row = second.row(channel, 100)
            self.assertGreater(row.mean_gain, 0.0)
            self.assertLess(row.gain_pvalue, 0.05)

    def test_paired_extraction_on_jpeg70(self):
        spec = build_spec(channels=['jpeg_like:70'], steps=[0, 100], trials=100)
        params = spec.generator()
        cfg = spec.optimizer_config()
        channel = spec.channels[0]
        results = [run_trial(params, spec, cfg, channel, trial) for trial in range(100)]
        not_worse = sum(r.accuracies[100] >= r.accuracies[0] for r in results)
        self.assertGreaterEqual(not_worse, 90)
