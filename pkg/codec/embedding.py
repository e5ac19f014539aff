"""Bits -> uniforms -> Gaussian latents, and the zero-threshold rule back."""

from dataclasses import dataclass

import numpy as np

from core.exceptions import InvalidInput

from .messages import BitMessage
from .normal import inverse_normal_cdf

MODES = ('random', 'midpoint')

# random mode samples on a 2**-53 grid: bit 0 -> [2**-53, 0.5 - 2**-53], bit 1 -> [0.5, 1 - 2**-52]
_GRID = 2.0 ** -53
_GRID_SLOTS = 2 ** 52 - 1


@dataclass(frozen=True, eq=False)
class UniformVector:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise InvalidInput("uniform vector must be a non-empty 1-D array")
        if not ((values > 0.0) & (values < 1.0)).all():
            raise InvalidInput("uniform values must lie in (0, 1)")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class LatentTensor:
    """A latent code laid out as (c, h, w); ``flat`` is the length-n view."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 3:
            raise InvalidInput(f"latent must have shape (c, h, w), got {values.shape}")
        if not np.isfinite(values).all():
            raise InvalidInput("latent contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_flat(cls, flat, shape=None):
        flat = np.asarray(flat, dtype=float).ravel()
        shape = tuple(shape) if shape is not None else (flat.size, 1, 1)
        if int(np.prod(shape)) != flat.size:
            raise InvalidInput(f"{flat.size} values do not fill latent shape {shape}")
        return cls(flat.reshape(shape))

    @property
    def shape(self):
        return self.values.shape

    @property
    def flat(self):
        return self.values.ravel()

    def __len__(self):
        return self.values.size


def bits_to_uniform(msg, key, mode='random'):
    """
    Map each bit to a point of its half interval: bit 0 -> (0, 0.5), bit 1 -> [0.5, 1).

    ``random`` draws uniformly inside the half interval from the keyed generator,
    which makes S exactly Uniform(0, 1) for fair bits. ``midpoint`` uses 0.25/0.75,
    which maximises the sign margin but is not secure.
    """
    if not isinstance(msg, BitMessage):
        msg = BitMessage(msg)
    if mode not in MODES:
        raise InvalidInput(f"unknown embedding mode {mode!r}; expected one of {MODES}")

    ones = msg.bits.astype(bool)
    if mode == 'midpoint':
        s = np.where(ones, 0.75, 0.25)
    else:
        slots = key.generator().integers(0, _GRID_SLOTS, size=len(msg), dtype=np.int64)
        s = np.where(ones, 0.5 + slots * _GRID, (slots + 1) * _GRID)
    return UniformVector(s)


def uniform_to_latent(S, shape):
    """z_i = Phi^-1(s_i), laid out as ``shape``."""
    shape = tuple(int(d) for d in shape)
    if len(shape) != 3 or int(np.prod(shape)) != len(S):
        raise InvalidInput(f"{len(S)} uniforms do not fill latent shape {shape}")
    return LatentTensor(inverse_normal_cdf(S.values).reshape(shape))


def embed(msg, key, shape, mode='random'):
    return uniform_to_latent(bits_to_uniform(msg, key, mode), shape)


def latent_to_bits(Z):
    """Zero-threshold decoding: z < 0 -> 0, z >= 0 -> 1."""
    values = Z.flat if isinstance(Z, LatentTensor) else np.asarray(Z, dtype=float).ravel()
    if np.isnan(values).any():
        raise InvalidInput("cannot decode a latent containing NaN")
    return BitMessage((values >= 0.0).astype(np.uint8))


def bit_accuracy(a, b):
    """Fraction of positions where the two messages agree."""
    a_bits = a.bits if isinstance(a, BitMessage) else np.asarray(a)
    b_bits = b.bits if isinstance(b, BitMessage) else np.asarray(b)
    if a_bits.shape != b_bits.shape:
        raise InvalidInput(f"length mismatch: {a_bits.size} vs {b_bits.size} bits")
    return float(np.mean(a_bits == b_bits))
