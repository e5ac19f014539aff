from .bench import Command as BenchCommand


class Command(BenchCommand):
    help = 'Step-count ablation: bench on jpeg_like:70 with steps 0 50 80 100 110 unless overridden.'
    kind = 'ablate'
