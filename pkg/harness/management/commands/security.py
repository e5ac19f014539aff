from pathlib import Path

import numpy as np
from django.conf import settings

from codec.embedding import MODES, bits_to_uniform, uniform_to_latent
from codec.messages import StegoKey, random_message
from harness.experiments import SCHEMA_VERSION
from harness.management.base import StegoCommand
from harness.output import render_json, staged_directory
from security.goodness import latent_security_report, suite_pass_rate
from security.serializers import GoodnessReportSerializer

CALIBRATION_FLOOR = 0.95


class Command(StegoCommand):
    help = 'Sender-side security suite: KS/KL checks on embedded latents and uniforms, plus a type-I pass rate.'

    def add_arguments(self, parser):
        parser.add_argument('--runs', type=int, default=200)
        parser.add_argument('--size', type=int, default=65536)
        parser.add_argument('--alpha', type=float, default=None)
        parser.add_argument('--master-seed', type=int, default=None)
        parser.add_argument('--mode', choices=MODES, default='random')
        parser.add_argument('--out', default=None)

    def run(self, **options):
        stego = settings.STEGO
        alpha = options['alpha'] if options['alpha'] is not None else stego['SIGNIFICANCE']
        master_seed = options['master_seed'] if options['master_seed'] is not None else stego['MASTER_SEED']
        size, mode = options['size'], options['mode']

        rng = np.random.default_rng([master_seed, size])
        msg = random_message(size, rng)
        uniforms = bits_to_uniform(msg, StegoKey(int(rng.integers(0, 2 ** 63))), mode=mode)
        suite = latent_security_report(
            uniform_to_latent(uniforms, (size, 1, 1)), uniforms, ones_rate=msg.ones_rate(), alpha=alpha,
        )
        rate, runs = suite_pass_rate(options['runs'], size, alpha=alpha, master_seed=master_seed, mode=mode)

        report = {
            'schema_version': SCHEMA_VERSION,
            'mode': mode,
            'size': size,
            'alpha': alpha,
            'master_seed': master_seed,
            'suite': GoodnessReportSerializer(suite, many=True).data,
            'pass_rate': rate,
            'runs': GoodnessReportSerializer(runs, many=True).data,
        }
        out = Path(options['out'] or stego['OUTPUT_DIR'] / 'security')
        with staged_directory(out) as scratch:
            (scratch / 'security.json').write_bytes(render_json(report))

        for entry in suite:
            self.stdout.write(f'  {entry.test:<14} n={entry.n} statistic={entry.statistic:.4g} pass={entry.passed}')
        style = self.style.SUCCESS if rate >= CALIBRATION_FLOOR else self.style.WARNING
        self.stdout.write(style(f'KS pass rate {rate:.3f} over {len(runs)} runs at alpha={alpha}'))
