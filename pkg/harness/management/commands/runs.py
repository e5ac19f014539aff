from harness.management.base import StegoCommand
from harness.models import ExperimentRun
from harness.output import render_json
from harness.serializers import ExperimentRunSerializer


class Command(StegoCommand):
    help = 'Print recorded runs from the experiment ledger as JSON, newest first.'

    def add_arguments(self, parser):
        parser.add_argument('--kind', choices=[k for k, _ in ExperimentRun.KIND_CHOICES], default=None)
        parser.add_argument('--generator-seed', type=int, default=None)
        parser.add_argument('--limit', type=int, default=10)

    def run(self, **options):
        runs = ExperimentRun.objects.prefetch_related('rows')
        if options['kind']:
            runs = runs.filter(kind=options['kind'])
        if options['generator_seed'] is not None:
            runs = runs.filter(generator_seed=options['generator_seed'])
        data = ExperimentRunSerializer(runs[:max(options['limit'], 0)], many=True).data
        self.stdout.write(render_json(data).decode('utf-8'))
