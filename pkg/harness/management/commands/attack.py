from pathlib import Path

from channels.transforms import apply_channel, parse_channel
from generator.images import read_image, write_image
from harness.management.base import StegoCommand
from harness.output import staged_files


class Command(StegoCommand):
    help = 'Pass an image through one simulated channel (identity, float16, bitdepth:B, jpeg_like:Q).'

    def add_arguments(self, parser):
        parser.add_argument('--image', required=True)
        parser.add_argument('--channel', required=True)
        parser.add_argument('--out', required=True)

    def run(self, **options):
        channel = parse_channel(options['channel'])
        image, header = read_image(options['image'])
        degraded = apply_channel(channel, image)
        extra = {k: v for k, v in header.items() if k not in ('shape', 'seed', 'version')}
        extra['channel'] = channel.label

        out = Path(options['out'])
        with staged_files(out) as (tmp,):
            write_image(degraded, tmp, seed=header.get('seed'), **extra)
        self.stdout.write(self.style.SUCCESS(f'Applied {channel.label}: {out}'))
