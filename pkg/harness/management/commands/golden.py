import numpy as np

from codec.embedding import LatentTensor
from core.exceptions import InvalidInput
from generator.network import decode_image
from generator.params import GOLDEN_FIXTURE, golden_generator
from harness.management.base import StegoCommand
from harness.output import staged_files


class Command(StegoCommand):
    help = 'Write the zero-latent decoder fixture the generator tests compare against.'

    def add_arguments(self, parser):
        parser.add_argument('--force', action='store_true', help='Overwrite an existing fixture.')

    def run(self, **options):
        if GOLDEN_FIXTURE.exists() and not options['force']:
            self.stdout.write(f'Fixture already present: {GOLDEN_FIXTURE}')
            return
        params = golden_generator()
        pixels = decode_image(params, LatentTensor(np.zeros(params.latent_shape))).pixels
        if not np.all(np.isfinite(pixels)):
            raise InvalidInput("zero-latent image is not finite")
        with staged_files(GOLDEN_FIXTURE) as (tmp,):
            with open(tmp, 'wb') as f:
                np.save(f, pixels)
        self.stdout.write(self.style.SUCCESS(f'Wrote {GOLDEN_FIXTURE}'))
