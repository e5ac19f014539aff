from django.conf import settings

from harness.experiments import record_run, run_crossmodel, write_table
from harness.output import render_json, staged_directory

from .bench import Command as BenchCommand


class Command(BenchCommand):
    help = 'Run the identical optimizer against the primary and a second, independently seeded generator.'
    kind = 'crossmodel'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--second-seed', type=int, default=None)
        parser.add_argument('--second-hidden', type=int, default=None)

    def run(self, **options):
        spec = self.spec_from(options)
        out = self.output_dir(options)
        second_seed = options.get('second_seed')
        if second_seed is None:
            second_seed = settings.STEGO['SECOND_GENERATOR_SEED']
        second_hidden = options.get('second_hidden') or settings.STEGO['SECOND_HIDDEN_WIDTH']

        primary, second, summary = run_crossmodel(spec, second_seed, second_hidden)
        with staged_directory(out) as scratch:
            write_table(primary, scratch / 'primary')
            write_table(second, scratch / 'second')
            (scratch / 'crossmodel.json').write_bytes(render_json(summary))
        if not options.get('no_ledger'):
            record_run(primary, out / 'primary')
            record_run(second, out / 'second')

        for entry in summary['channels']:
            self.stdout.write(
                f"  {entry['channel']:<14} primary {entry['primary_base']:.4f}->{entry['primary_opt']:.4f}  "
                f"second {entry['second_base']:.4f}->{entry['second_opt']:.4f}"
            )
        if not summary['hashes_identical']:
            self.stdout.write(self.style.WARNING('Optimizer hash differs between the two runs'))
        self.stdout.write(self.style.SUCCESS(f'Wrote {out}'))
