"""Simulated transmission channels: pure image-to-image maps ordered by severity."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft

from core.exceptions import InvalidInput
from generator.images import ImageTensor

from .quant import quality_to_table

logger = logging.getLogger(__name__)

IDENTITY = 'identity'
FLOAT16 = 'float16'
BITDEPTH = 'bitdepth'
JPEG_LIKE = 'jpeg_like'
KINDS = (IDENTITY, FLOAT16, BITDEPTH, JPEG_LIKE)

_ALIASES = {'float16_roundtrip': FLOAT16, 'tiff32': IDENTITY, 'tiff16': FLOAT16}
BLOCK = 8


@dataclass(frozen=True)
class ChannelConfig:
    kind: str
    bits: int = None
    quality: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown channel kind {self.kind!r}")
        if self.kind == BITDEPTH:
            if self.bits is None or not 1 <= self.bits <= 16:
                raise InvalidInput(f"bitdepth needs bits in [1, 16], got {self.bits!r}")
        elif self.bits is not None:
            raise InvalidInput(f"{self.kind} takes no bit depth")
        if self.kind == JPEG_LIKE:
            if self.quality is None or not 1 <= self.quality <= 100:
                raise InvalidInput(f"jpeg_like needs quality in [1, 100], got {self.quality!r}")
        elif self.quality is not None:
            raise InvalidInput(f"{self.kind} takes no quality")

    @property
    def label(self):
        if self.kind == BITDEPTH:
            return f"{BITDEPTH}:{self.bits}"
        if self.kind == JPEG_LIKE:
            return f"{JPEG_LIKE}:{self.quality}"
        return self.kind

    @property
    def lossless(self):
        return self.kind == IDENTITY

    def __str__(self):
        return self.label


def parse_channel(label):
    """'identity' | 'float16' | 'bitdepth:B' | 'jpeg_like:Q' (also 'jpeg:Q')."""
    if isinstance(label, ChannelConfig):
        return label
    text = str(label).strip().lower()
    kind, _, arg = text.partition(':')
    kind = _ALIASES.get(kind, kind)
    if kind == 'jpeg':
        kind = JPEG_LIKE
    if kind in (BITDEPTH, JPEG_LIKE):
        try:
            value = int(arg)
        except ValueError as e:
            raise InvalidInput(f"channel {label!r} needs an integer argument") from e
        if kind == BITDEPTH:
            return ChannelConfig(BITDEPTH, bits=value)
        return ChannelConfig(JPEG_LIKE, quality=value)
    if arg:
        raise InvalidInput(f"channel {label!r} takes no argument")
    return ChannelConfig(kind)


def channel_severity_order():
    """Lossless float, half precision, 8-bit, then JPEG at 90/70/50."""
    return [
        ChannelConfig(IDENTITY),
        ChannelConfig(FLOAT16),
        ChannelConfig(BITDEPTH, bits=8),
        ChannelConfig(JPEG_LIKE, quality=90),
        ChannelConfig(JPEG_LIKE, quality=70),
        ChannelConfig(JPEG_LIKE, quality=50),
    ]


def severity_rank(cfg):
    """Position in channel_severity_order(); channels outside it rank after all of them."""
    labels = [c.label for c in channel_severity_order()]
    try:
        return labels.index(cfg.label)
    except ValueError:
        return len(labels)


def _bitdepth(pixels, bits):
    levels = 2 ** bits - 1
    return np.rint(np.clip(pixels, 0.0, 1.0) * levels) / levels


def _jpeg_like(pixels, table, rounding):
    H, W, C = pixels.shape
    if H % BLOCK or W % BLOCK:
        raise InvalidInput(f"jpeg_like needs height and width divisible by {BLOCK}, got {H}x{W}")
    levels = pixels * 255.0 - 128.0
    blocks = levels.reshape(H // BLOCK, BLOCK, W // BLOCK, BLOCK, C)
    coeffs = fft.dctn(blocks, type=2, axes=(1, 3), norm='ortho')
    q = table.entries.astype(float)[None, :, None, :, None]
    scaled = coeffs / q
    if rounding:
        scaled = np.rint(scaled)
    restored = fft.idctn(scaled * q, type=2, axes=(1, 3), norm='ortho')
    return np.clip((restored.reshape(H, W, C) + 128.0) / 255.0, 0.0, 1.0)


def apply_channel(cfg, X, rounding=True, table=None):
    """
    Degrade X as the given channel would.

    ``rounding`` and ``table`` only affect jpeg_like: they disable the quantizer
    rounding and override the quality-scaled table, for isolating the DCT.
    """
    cfg = parse_channel(cfg)
    pixels = X.pixels if isinstance(X, ImageTensor) else np.asarray(X, dtype=float)

    if cfg.kind == IDENTITY:
        out = pixels.copy()
    elif cfg.kind == FLOAT16:
        out = pixels.astype(np.float16).astype(float)
    elif cfg.kind == BITDEPTH:
        out = _bitdepth(pixels, cfg.bits)
    else:
        out = _jpeg_like(pixels, table or quality_to_table(cfg.quality), rounding)

    logger.debug("applied %s", cfg.label)
    return ImageTensor(out)
