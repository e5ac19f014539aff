import logging
from pathlib import Path

from django.conf import settings

from codec.embedding import bit_accuracy
from codec.messages import read_message, write_message
from generator.images import read_image
from harness.management.base import StegoCommand
from harness.output import render_json, staged_directory
from optimizer.config import OptimizerConfig
from optimizer.engine import extract_with_optimization
from optimizer.serializers import BoundReportSerializer, TraceSummarySerializer
from optimizer.trace import verify_trace

logger = logging.getLogger(__name__)


class Command(StegoCommand):
    help = 'Recover the message from a (possibly degraded) stego image, refining the latent first.'

    def add_arguments(self, parser):
        self.add_generator_arguments(parser)
        parser.add_argument('--image', required=True)
        parser.add_argument('--steps', type=int, default=None, help='Optimizer steps (0 = encoder only).')
        parser.add_argument('--eta', default=None, help="'auto' or 'fixed:VALUE'.")
        parser.add_argument('--reference', default=None, help='Original message file, to report accuracy.')
        parser.add_argument('--out', default=None, help='Output directory (default OUTPUT_DIR/extract).')

    def run(self, **options):
        params = self.generator_from(options)
        image, header = read_image(options['image'])
        if header.get('seed') not in (None, params.seed):
            logger.warning("image was written by generator seed %s, extracting with %s", header['seed'], params.seed)
        cfg = OptimizerConfig.from_settings(steps=options['steps'], eta=options['eta'])
        reference = read_message(options['reference']) if options['reference'] else None

        extraction = extract_with_optimization(params, image, cfg)
        trace = extraction.trace
        report = {
            'steps': cfg.steps,
            'eta_policy': cfg.eta_policy,
            'trace': TraceSummarySerializer(trace).data,
            'bound': BoundReportSerializer(verify_trace(trace, trace.lipschitz, trace.eta)).data if len(trace) else None,
            'final_recon': extraction.recon,
            'accuracy': bit_accuracy(extraction.message, reference) if reference is not None else None,
        }

        out = Path(options['out'] or settings.STEGO['OUTPUT_DIR'] / 'extract')
        with staged_directory(out) as scratch:
            write_message(extraction.message, scratch / 'message.bin')
            trace.write_csv(scratch / 'trace.csv')
            (scratch / 'report.json').write_bytes(render_json(report))

        summary = f'Extracted {len(extraction.message)} bits to {out}'
        if report['accuracy'] is not None:
            summary += f" (accuracy {report['accuracy']:.4f})"
        self.stdout.write(self.style.SUCCESS(summary))
