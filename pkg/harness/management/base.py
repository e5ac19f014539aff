"""Shared plumbing for the stego management commands."""

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import InvalidInput, NumericFailure
from generator.params import default_generator

INVALID_INPUT_EXIT = 2
NUMERIC_FAILURE_EXIT = 3


class StegoCommand(BaseCommand):
    """Subclasses implement ``run``; domain errors become exit codes 2 and 3."""

    def add_generator_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=None, help='Generator seed.')
        parser.add_argument('--latent-shape', default=None, help='Latent shape c,h,w.')
        parser.add_argument('--image-shape', default=None, help='Image shape H,W,C.')
        parser.add_argument('--hidden', type=int, default=None, help='Decoder hidden width.')

    def generator_from(self, options):
        return default_generator(
            seed=options.get('seed'),
            latent_shape=options.get('latent_shape'),
            image_shape=options.get('image_shape'),
            hidden=options.get('hidden'),
        )

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except InvalidInput as e:
            raise CommandError(str(e), returncode=INVALID_INPUT_EXIT) from e
        except NumericFailure as e:
            raise CommandError(str(e), returncode=NUMERIC_FAILURE_EXIT) from e

    def run(self, **options):
        raise NotImplementedError
