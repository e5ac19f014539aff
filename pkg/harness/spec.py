"""What one experiment runs: generator, channels, step counts, trials."""

from dataclasses import dataclass, replace

from django.conf import settings

from channels.transforms import channel_severity_order, parse_channel
from codec.embedding import MODES
from core.exceptions import InvalidInput
from generator.params import make_generator, parse_shape
from optimizer.config import OptimizerConfig

KINDS = ('bench', 'ablate', 'crossmodel')
ABLATION_STEPS = (0, 50, 80, 100, 110)
ABLATION_CHANNEL = 'jpeg_like:70'


@dataclass(frozen=True)
class ExperimentSpec:
    generator_seed: int
    hidden: int
    latent_shape: tuple
    image_shape: tuple
    channels: list
    steps: list
    trials: int
    mode: str
    master_seed: int
    eta: str = 'auto'
    workers: int = 1
    kind: str = 'bench'

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise InvalidInput("an experiment needs at least one trial")
        if not self.channels:
            raise InvalidInput("an experiment needs at least one channel")
        if not self.steps or min(self.steps) < 0:
            raise InvalidInput("an experiment needs at least one non-negative step count")
        if self.mode not in MODES:
            raise InvalidInput(f"unknown message mode {self.mode!r}")
        object.__setattr__(self, 'latent_shape', parse_shape(self.latent_shape))
        object.__setattr__(self, 'image_shape', parse_shape(self.image_shape))
        object.__setattr__(self, 'channels', [parse_channel(c) for c in self.channels])
        object.__setattr__(self, 'steps', sorted({int(s) for s in self.steps}))

    @property
    def checkpoints(self):
        """Requested step counts plus 0, the baseline every gain is measured against."""
        return sorted(set(self.steps) | {0})

    def generator(self):
        return make_generator(self.generator_seed, self.latent_shape, self.image_shape, hidden=self.hidden)

    def optimizer_config(self):
        return OptimizerConfig.from_settings(steps=max(self.steps), eta=self.eta)

    def with_generator(self, seed, hidden=None):
        return replace(self, generator_seed=seed, hidden=self.hidden if hidden is None else hidden)

    def to_dict(self):
        return {
            'kind': self.kind,
            'generator_seed': self.generator_seed,
            'hidden': self.hidden,
            'latent_shape': list(self.latent_shape),
            'image_shape': list(self.image_shape),
            'channels': [c.label for c in self.channels],
            'steps': list(self.steps),
            'trials': self.trials,
            'mode': self.mode,
            'master_seed': self.master_seed,
            'eta': self.eta,
        }


def spec_data(kind='bench', **overrides):
    """Serializer input for ``kind`` built from settings.STEGO; ``None`` overrides are ignored."""
    stego = settings.STEGO
    data = {
        'kind': kind,
        'generator_seed': stego['GENERATOR_SEED'],
        'hidden': stego['HIDDEN_WIDTH'],
        'latent_shape': stego['LATENT_SHAPE'],
        'image_shape': stego['IMAGE_SHAPE'],
        'channels': [c.label for c in channel_severity_order()],
        'steps': [0, stego['OPTIMIZER_STEPS']],
        'trials': stego['TRIALS'],
        'mode': stego['MESSAGE_MODE'],
        'master_seed': stego['MASTER_SEED'],
        'eta': stego['ETA'],
        'workers': stego['WORKERS'],
    }
    if kind == 'ablate':
        data['steps'] = list(ABLATION_STEPS)
        data['channels'] = [ABLATION_CHANNEL]
    data.update({k: v for k, v in overrides.items() if v is not None})
    return data
