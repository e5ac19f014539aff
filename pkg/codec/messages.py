"""Message bits, stego keys and their on-disk form."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.exceptions import InvalidInput

logger = logging.getLogger(__name__)

MAX_KEY = 2 ** 64


@dataclass(frozen=True, eq=False)
class BitMessage:
    """The (already encrypted) payload M = {m_i}, one 0/1 entry per latent coordinate."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size == 0:
            raise InvalidInput("message must be a non-empty 1-D bit sequence")
        if not np.isin(bits, (0, 1)).all():
            raise InvalidInput("message bits must be 0 or 1")
        bits = bits.astype(np.uint8)
        bits.setflags(write=False)
        object.__setattr__(self, 'bits', bits)

    def __len__(self):
        return self.bits.size

    def ones_rate(self):
        return float(self.bits.mean())

    def complement(self):
        return BitMessage(1 - self.bits)


@dataclass(frozen=True)
class StegoKey:
    """Seed of the within-interval sampler; not part of the shared secret."""

    seed: int

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= int(self.seed) < MAX_KEY:
            raise InvalidInput(f"stego key must be an unsigned 64-bit integer, got {self.seed!r}")

    def generator(self):
        return np.random.default_rng(int(self.seed))


def random_message(n, rng):
    """i.i.d. Bernoulli(0.5) bits."""
    if n < 1:
        raise InvalidInput("message length must be >= 1")
    return BitMessage(rng.integers(0, 2, size=n, dtype=np.uint8))


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + '.json')


def write_message(msg, path):
    """Pack bits MSB first (last byte zero padded) and record the true length in a sidecar."""
    path = Path(path)
    path.write_bytes(np.packbits(msg.bits, bitorder='big').tobytes())
    sidecar_path(path).write_text(json.dumps({'bits': len(msg)}))
    return path


def read_message(path, bits=None):
    """Read a packed message; the length comes from ``bits``, the sidecar, or 8 per byte."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise InvalidInput(f"cannot read message file {path}: {e}") from e

    if bits is None:
        side = sidecar_path(path)
        if side.exists():
            try:
                bits = int(json.loads(side.read_text())['bits'])
            except (ValueError, KeyError, TypeError) as e:
                raise InvalidInput(f"malformed message sidecar {side}") from e
        else:
            bits = 8 * len(raw)

    unpacked = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder='big')
    if bits < 1 or bits > unpacked.size:
        raise InvalidInput(f"message file {path} holds {unpacked.size} bits, sidecar claims {bits}")
    logger.debug("read %d-bit message from %s", bits, path)
    return BitMessage(unpacked[:bits])
