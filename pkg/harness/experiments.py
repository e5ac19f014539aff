"""
Paired Monte-Carlo experiments: every trial embeds one message, sends it through
one channel and extracts it at every requested step count from a single descent,
so gains over steps=0 are paired differences on identical inputs.
"""

import csv
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from django.db import transaction
from scipy import stats

from channels.transforms import apply_channel, severity_rank
from codec.embedding import bit_accuracy, embed, latent_to_bits
from codec.messages import StegoKey, random_message
from core.exceptions import InvalidInput
from generator.network import decode_image, denoise, encode_image, invert_denoise
from optimizer import engine
from optimizer.engine import refine_checkpoints

from .models import ExperimentRun, ResultRow
from .output import fmt, render_json
from .serializers import ExperimentSpecSerializer, ResultRowSerializer
from .spec import spec_data

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RESULT_COLUMNS = (
    'schema_version', 'channel', 'steps', 'mean_accuracy', 'std_accuracy', 'trials',
    'mean_gain', 'gain_percent', 'gain_pvalue', 'mean_recon',
)
KEY_RANGE = 2 ** 63


def build_spec(kind='bench', **overrides):
    """Validated ExperimentSpec from settings defaults plus ``overrides``."""
    serializer = ExperimentSpecSerializer(data=spec_data(kind, **overrides))
    if not serializer.is_valid():
        raise InvalidInput(f"invalid experiment: {dict(serializer.errors)}")
    return serializer.save()


def optimizer_hash(cfg):
    """Identifies the optimizer code path and its configuration."""
    digest = hashlib.sha256(Path(engine.__file__).read_bytes())
    digest.update(cfg.to_json().encode('utf-8'))
    return digest.hexdigest()


def trace_filename(channel):
    return channel.label.replace(':', '_') + '.csv'


@dataclass(frozen=True)
class TrialResult:
    trial: int
    accuracies: dict
    recons: dict
    trace: object = None


def run_trial(params, spec, cfg, channel, trial):
    rng = np.random.default_rng([spec.master_seed, trial])
    msg = random_message(params.n, rng)
    key = StegoKey(int(rng.integers(0, KEY_RANGE)))
    stego = decode_image(params, denoise(params, embed(msg, key, params.latent_shape, spec.mode)))
    received = apply_channel(channel, stego)

    points, trace = refine_checkpoints(params, encode_image(params, received), received, cfg, spec.checkpoints)
    return TrialResult(
        trial=trial,
        accuracies={p.steps: bit_accuracy(latent_to_bits(invert_denoise(params, p.latent)), msg) for p in points},
        recons={p.steps: p.recon for p in points},
        trace=trace if trial == 0 else None,
    )


def sign_test_pvalue(gains):
    """One-sided binomial sign test of P(gain > 0) > 1/2 over the non-tied pairs."""
    wins = int(np.sum(gains > 0))
    losses = int(np.sum(gains < 0))
    if wins + losses == 0:
        return 1.0
    return float(stats.binomtest(wins, wins + losses, 0.5, alternative='greater').pvalue)


def summarize_cell(channel, spec, results):
    base = np.array([r.accuracies[0] for r in results])
    rows = []
    for steps in spec.steps:
        acc = np.array([r.accuracies[steps] for r in results])
        gains = acc - base
        mean_gain = float(gains.mean())
        rows.append(ResultRow(
            channel=channel.label,
            steps=steps,
            mean_accuracy=float(acc.mean()),
            std_accuracy=float(acc.std()),
            trials=len(results),
            mean_gain=mean_gain,
            gain_percent=100.0 * mean_gain,
            gain_pvalue=sign_test_pvalue(gains),
            mean_recon=float(np.mean([r.recons[steps] for r in results])),
            severity_rank=severity_rank(channel),
        ))
    return rows


@dataclass
class ResultTable:
    kind: str
    spec: object
    generator: dict
    optimizer_hash: str
    rows: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)

    def row(self, channel, steps):
        label = getattr(channel, 'label', channel)
        for r in self.rows:
            if r.channel == label and r.steps == steps:
                return r
        raise KeyError((label, steps))

    def channels(self):
        seen = []
        for r in self.rows:
            if r.channel not in seen:
                seen.append(r.channel)
        return seen

    def gains(self, channel):
        label = getattr(channel, 'label', channel)
        return {r.steps: r.mean_gain for r in self.rows if r.channel == label}

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'kind': self.kind,
            'master_seed': self.spec.master_seed,
            'generator': self.generator,
            'optimizer_hash': self.optimizer_hash,
            'spec': self.spec.to_dict(),
            'rows': ResultRowSerializer(self.rows, many=True).data,
        }

    def write_csv(self, path):
        with Path(path).open('w', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(RESULT_COLUMNS)
            for r in self.rows:
                writer.writerow([
                    SCHEMA_VERSION, r.channel, r.steps, fmt(r.mean_accuracy), fmt(r.std_accuracy),
                    r.trials, fmt(r.mean_gain), fmt(r.gain_percent), fmt(r.gain_pvalue), fmt(r.mean_recon),
                ])
        return Path(path)


def run_experiment(spec, params=None):
    """Full factorial channel x steps x trials; rows come back in severity order."""
    params = params or spec.generator()
    cfg = spec.optimizer_config()
    table = ResultTable(
        kind=spec.kind, spec=spec, generator=params.describe(), optimizer_hash=optimizer_hash(cfg),
    )
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        for channel in spec.channels:
            results = list(pool.map(partial(run_trial, params, spec, cfg, channel), range(spec.trials)))
            table.rows.extend(summarize_cell(channel, spec, results))
            table.traces[channel.label] = results[0].trace
            top = table.row(channel, spec.steps[-1])
            logger.info(
                "%s: accuracy %.4f at %d steps, gain %+.4f over %d trials",
                channel.label, top.mean_accuracy, top.steps, top.mean_gain, spec.trials,
            )
    table.rows.sort(key=lambda r: (r.severity_rank, r.channel, r.steps))
    return table


def run_crossmodel(spec, second_seed, second_hidden=None):
    """The same optimizer against the primary generator and a second, independently seeded one."""
    primary = run_experiment(spec)
    second = run_experiment(spec.with_generator(second_seed, second_hidden))
    top = spec.steps[-1]
    channels = []
    for label in primary.channels():
        p, s = primary.row(label, top), second.row(label, top)
        channels.append({
            'channel': label,
            'steps': top,
            'primary_base': p.mean_accuracy - p.mean_gain,
            'primary_opt': p.mean_accuracy,
            'primary_gain': p.mean_gain,
            'second_base': s.mean_accuracy - s.mean_gain,
            'second_opt': s.mean_accuracy,
            'second_gain': s.mean_gain,
        })
    summary = {
        'schema_version': SCHEMA_VERSION,
        'kind': 'crossmodel',
        'optimizer_hash': primary.optimizer_hash,
        'hashes_identical': primary.optimizer_hash == second.optimizer_hash,
        'primary': primary.generator,
        'second': second.generator,
        'channels': channels,
    }
    return primary, second, summary


def write_table(table, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    table.write_csv(directory / 'results.csv')
    (directory / 'results.json').write_bytes(render_json(table.to_dict()))
    traces = directory / 'traces'
    traces.mkdir(exist_ok=True)
    for channel in table.spec.channels:
        trace = table.traces.get(channel.label)
        if trace is not None:
            trace.write_csv(traces / trace_filename(channel))


def record_run(table, output_dir=''):
    """Ledger entry for a finished run; never read back into results."""
    spec = table.spec
    with transaction.atomic():
        run = ExperimentRun.objects.create(
            kind=table.kind,
            master_seed=spec.master_seed,
            generator_seed=table.generator['seed'],
            hidden_width=table.generator['hidden'],
            message_mode=spec.mode,
            trials=spec.trials,
            channels=[c.label for c in spec.channels],
            steps=list(spec.steps),
            optimizer_hash=table.optimizer_hash,
            spec=spec.to_dict(),
            schema_version=SCHEMA_VERSION,
            output_dir=str(output_dir),
        )
        for row in table.rows:
            row.run = run
        ResultRow.objects.bulk_create(table.rows)
    logger.info("recorded run %s with %d rows", run.pk, len(table.rows))
    return run
