import json
from pathlib import Path

from django.conf import settings

from codec.embedding import MODES, embed
from codec.messages import StegoKey, read_message, sidecar_path
from core.exceptions import InvalidInput
from generator.images import write_image
from generator.network import decode_image, denoise
from harness.management.base import StegoCommand
from harness.output import staged_files


class Command(StegoCommand):
    help = 'Embed a message file into a stego image (raw float32, or PPM by suffix) with a JSON sidecar.'

    def add_arguments(self, parser):
        self.add_generator_arguments(parser)
        parser.add_argument('--message', required=True, help='Packed message file (bit length from its sidecar).')
        parser.add_argument('--key', type=int, required=True, help='Stego key seeding the interval sampler.')
        parser.add_argument('--mode', choices=MODES, default=None)
        parser.add_argument('--out', required=True, help='Output image path.')

    def run(self, **options):
        params = self.generator_from(options)
        msg = read_message(options['message'])
        if len(msg) != params.n:
            raise InvalidInput(f"message has {len(msg)} bits but latent {params.latent_shape} holds {params.n}")
        mode = options['mode'] or settings.STEGO['MESSAGE_MODE']

        z_t = embed(msg, StegoKey(options['key']), params.latent_shape, mode=mode)
        image = decode_image(params, denoise(params, z_t))

        out = Path(options['out'])
        sidecar = {
            'shape': list(params.image_shape),
            'latent_shape': list(params.latent_shape),
            'seed': params.seed,
            'hidden': params.hidden,
            'mode': mode,
            'bits': len(msg),
        }
        with staged_files(out, sidecar_path(out)) as (tmp_image, tmp_sidecar):
            write_image(image, tmp_image, seed=params.seed, mode=mode)
            tmp_sidecar.write_text(json.dumps(sidecar, sort_keys=True))

        self.stdout.write(self.style.SUCCESS(f'Embedded {len(msg)} bits into {out}'))
