"""Seeded construction of the surrogate generator's weights."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.conf import settings
from scipy import fft

from core.exceptions import InvalidInput

logger = logging.getLogger(__name__)

MIXING_BIAS_SCALE = 0.1
HIDDEN_BIAS_SCALE = 0.1
PIXEL_BIAS_SCALE = 0.3
# singular values of W1 run geometrically between these
W1_GAIN_TOP = 1.5
W1_GAIN_BOTTOM = 0.25
W2_GAIN = 6.0
# textures and the pixel bias only use block DCT frequencies with fy + fx <= this
TEXTURE_BAND = 3
BLEND_LIMIT = 0.5

GOLDEN_FIXTURE = Path(__file__).resolve().parent / 'fixtures' / 'golden_seed42_zero.npy'


def parse_shape(text, size=3):
    """'4,16,16' -> (4, 16, 16)"""
    if isinstance(text, (tuple, list)):
        parts = list(text)
    else:
        parts = [p for p in str(text).replace('x', ',').split(',') if p.strip()]
    try:
        shape = tuple(int(p) for p in parts)
    except ValueError as e:
        raise InvalidInput(f"cannot parse shape {text!r}") from e
    if len(shape) != size or min(shape) < 1:
        raise InvalidInput(f"shape {text!r} must have {size} positive entries")
    return shape


def default_shapes():
    stego = settings.STEGO
    return parse_shape(stego['LATENT_SHAPE']), parse_shape(stego['IMAGE_SHAPE'])


@dataclass(frozen=True, eq=False)
class GeneratorParams:
    """
    Immutable weights of the surrogate pipeline.

    ``mixing``/``mixing_bias`` form the invertible denoiser Z_0 = Q Z_T + b.
    The decoder acts on each latent cell z (c values), lets every hidden
    channel leak into the four neighbouring cells, and produces the cell's
    k x k x C pixel block::

        u = W1 z + b1,  g = alpha * tanh(u / alpha),  h = S(g),  y = W2 h + b2,  x = sigmoid(y)

    where S(g) = (1 - blend) g + blend * mean of the 4 periodic neighbours of g
    on the cell grid. S is symmetric with eigenvalues in [1 - 2 blend, 1].
    The columns of W2 and b2 are band-limited to low block-DCT frequencies.
    With ``linear`` set, tanh and the sigmoid are replaced by the identity
    (test hook).
    """

    seed: int
    latent_shape: tuple
    image_shape: tuple
    factor: int
    hidden: int
    alpha: float
    blend: float
    linear: bool
    mixing: np.ndarray
    mixing_bias: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w1_pinv: np.ndarray
    w2_pinv: np.ndarray

    @property
    def n(self):
        c, h, w = self.latent_shape
        return c * h * w

    @property
    def cells(self):
        return self.latent_shape[1] * self.latent_shape[2]

    @property
    def block(self):
        return self.factor * self.factor * self.image_shape[2]

    def describe(self):
        return {
            'seed': self.seed,
            'latent_shape': list(self.latent_shape),
            'image_shape': list(self.image_shape),
            'hidden': self.hidden,
            'alpha': self.alpha,
            'blend': self.blend,
            'linear': self.linear,
        }


def _orthonormal(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)


def texture_band(k):
    """Boolean k x k mask of the block-DCT frequencies textures may use."""
    fy, fx = np.meshgrid(np.arange(k), np.arange(k), indexing='ij')
    return fy + fx <= TEXTURE_BAND


def _band_limited(rng, band, channels, count):
    # random spectra on the band only, back to pixels as (k*k*C, count) columns
    k = band.shape[0]
    spectrum = np.zeros((k, k, channels, count))
    spectrum[band] = rng.standard_normal((int(band.sum()), channels, count))
    return fft.idctn(spectrum, axes=(0, 1), norm='ortho').reshape(k * k * channels, count)


def make_generator(seed, latent_shape, image_shape, hidden=None, alpha=None, blend=None, linear=False):
    """Build the generator for ``seed``; equal arguments always give identical weights."""
    latent_shape = parse_shape(latent_shape)
    image_shape = parse_shape(image_shape)
    stego = settings.STEGO
    hidden = int(hidden if hidden is not None else stego['HIDDEN_WIDTH'])
    alpha = float(alpha if alpha is not None else stego['ACTIVATION_SCALE'])
    blend = float(blend if blend is not None else stego['SPATIAL_BLEND'])

    c, h, w = latent_shape
    H, W, C = image_shape
    if H % h or W % w or H // h != W // w:
        raise InvalidInput(
            f"image {image_shape} is not an integer upsampling of latent {latent_shape}"
        )
    k = H // h
    band = texture_band(k)
    widest = int(band.sum()) * C
    if not c <= hidden <= widest:
        raise InvalidInput(f"hidden width {hidden} must lie in [{c}, {widest}] for upsampling factor {k}")
    if alpha <= 0:
        raise InvalidInput("activation scale must be positive")
    if not 0.0 <= blend < BLEND_LIMIT:
        raise InvalidInput(f"spatial blend must lie in [0, {BLEND_LIMIT}), got {blend}")

    rng = np.random.default_rng(seed)
    n = c * h * w

    mixing = _orthonormal(rng, n, n)
    mixing_bias = MIXING_BIAS_SCALE * rng.standard_normal(n)

    gains = np.geomspace(W1_GAIN_TOP, W1_GAIN_BOTTOM, c)
    w1 = _orthonormal(rng, hidden, c) @ np.diag(gains) @ _orthonormal(rng, c, c).T
    b1 = HIDDEN_BIAS_SCALE * rng.standard_normal(hidden)

    w2 = W2_GAIN * np.linalg.qr(_band_limited(rng, band, C, hidden))[0]
    b2 = _band_limited(rng, band, C, 1).ravel()
    b2 *= PIXEL_BIAS_SCALE * np.sqrt(b2.size) / np.linalg.norm(b2)

    w1_pinv = np.linalg.pinv(w1)
    w2_pinv = np.linalg.pinv(w2)
    _frozen(mixing, mixing_bias, w1, b1, w2, b2, w1_pinv, w2_pinv)

    logger.info(
        "built generator seed=%s latent=%s image=%s hidden=%d blend=%g",
        seed, latent_shape, image_shape, hidden, blend,
    )
    return GeneratorParams(
        seed=int(seed),
        latent_shape=latent_shape,
        image_shape=image_shape,
        factor=k,
        hidden=hidden,
        alpha=alpha,
        blend=blend,
        linear=bool(linear),
        mixing=mixing,
        mixing_bias=mixing_bias,
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        w1_pinv=w1_pinv,
        w2_pinv=w2_pinv,
    )


def default_generator(seed=None, latent_shape=None, image_shape=None, hidden=None):
    """Generator from settings.STEGO, with any argument given overriding it."""
    default_latent, default_image = default_shapes()
    latent_shape = latent_shape or default_latent
    image_shape = image_shape or default_image
    seed = settings.STEGO['GENERATOR_SEED'] if seed is None else seed
    return make_generator(seed, latent_shape, image_shape, hidden=hidden)


def golden_generator():
    """The pinned generator behind the committed zero-latent fixture; ignores settings."""
    return make_generator(42, (4, 16, 16), (128, 128, 3), hidden=8, alpha=1.0, blend=0.015)
