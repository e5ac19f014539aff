import logging
from pathlib import Path

from django.conf import settings

from codec.embedding import MODES
from harness.experiments import build_spec, record_run, run_experiment, write_table
from harness.management.base import StegoCommand
from harness.output import staged_directory

logger = logging.getLogger(__name__)


class Command(StegoCommand):
    help = 'Channel x step-count benchmark with paired trials; writes results.csv, results.json and traces/.'
    kind = 'bench'

    def add_arguments(self, parser):
        self.add_generator_arguments(parser)
        parser.add_argument('--channel', action='append', default=None,
                            help='Channel label; repeat for several (default: full severity order).')
        parser.add_argument('--steps', type=int, nargs='+', default=None, help='Step counts to evaluate.')
        parser.add_argument('--eta', default=None, help="'auto' or 'fixed:VALUE'.")
        parser.add_argument('--trials', type=int, default=None)
        parser.add_argument('--mode', choices=MODES, default=None)
        parser.add_argument('--master-seed', type=int, default=None)
        parser.add_argument('--workers', type=int, default=None)
        parser.add_argument('--out', default=None, help='Output directory.')
        parser.add_argument('--no-ledger', action='store_true', help='Do not record the run in the database.')

    def spec_from(self, options):
        return build_spec(
            self.kind,
            generator_seed=options.get('seed'),
            hidden=options.get('hidden'),
            latent_shape=options.get('latent_shape'),
            image_shape=options.get('image_shape'),
            channels=options.get('channel'),
            steps=options.get('steps'),
            trials=options.get('trials'),
            mode=options.get('mode'),
            master_seed=options.get('master_seed'),
            eta=options.get('eta'),
            workers=options.get('workers'),
        )

    def output_dir(self, options):
        return Path(options.get('out') or settings.STEGO['OUTPUT_DIR'] / self.kind)

    def run(self, **options):
        spec = self.spec_from(options)
        out = self.output_dir(options)
        self.stdout.write(
            f'{self.kind}: {len(spec.channels)} channel(s) x steps {spec.steps} x {spec.trials} trial(s)'
        )
        table = run_experiment(spec)
        with staged_directory(out) as scratch:
            write_table(table, scratch)
        if not options.get('no_ledger'):
            record_run(table, out)

        for row in table.rows:
            self.stdout.write(
                f'  {row.channel:<14} steps={row.steps:<4} acc={row.mean_accuracy:.4f} '
                f'gain={row.gain_percent:+.2f}% p={row.gain_pvalue:.3g}'
            )
        self.stdout.write(self.style.SUCCESS(f'Wrote {out}'))
