"""Denoiser, decoder D, encoder E and the reconstruction loss, with exact derivatives."""

from collections import namedtuple

import numpy as np
from scipy import special

from codec.embedding import LatentTensor
from core.exceptions import InvalidInput

from .images import ImageTensor

PIXEL_CLAMP = 1e-6
HIDDEN_MARGIN = 1e-6

_Pass = namedtuple('_Pass', 'x dphi dsig')


def latent_array(params, Z):
    values = Z.values if isinstance(Z, LatentTensor) else np.asarray(Z, dtype=float)
    if values.shape != params.latent_shape:
        raise InvalidInput(f"latent shape {values.shape} does not match generator {params.latent_shape}")
    return values


def image_array(params, X):
    pixels = X.pixels if isinstance(X, ImageTensor) else np.asarray(X, dtype=float)
    if pixels.shape != params.image_shape:
        raise InvalidInput(f"image shape {pixels.shape} does not match generator {params.image_shape}")
    return pixels


def _to_cells(params, values):
    c = params.latent_shape[0]
    return values.reshape(c, params.cells).T


def _from_cells(params, cells):
    return cells.T.reshape(params.latent_shape)


def _to_blocks(params, pixels):
    _, h, w = params.latent_shape
    k, C = params.factor, params.image_shape[2]
    return pixels.reshape(h, k, w, k, C).transpose(0, 2, 1, 3, 4).reshape(h * w, k * k * C)


def _from_blocks(params, blocks):
    _, h, w = params.latent_shape
    k, C = params.factor, params.image_shape[2]
    return blocks.reshape(h, w, k, k, C).transpose(0, 2, 1, 3, 4).reshape(params.image_shape)


def _blend(params, hid):
    # S is symmetric, so the same map serves the forward pass and its adjoint
    beta = params.blend
    if not beta:
        return hid
    _, h, w = params.latent_shape
    grid = hid.reshape(h, w, -1)
    around = np.roll(grid, 1, 0) + np.roll(grid, -1, 0) + np.roll(grid, 1, 1) + np.roll(grid, -1, 1)
    return ((1.0 - beta) * grid + 0.25 * beta * around).reshape(hid.shape)


def _forward(params, cells):
    u = cells @ params.w1.T + params.b1
    if params.linear:
        hid, dphi = u, np.ones_like(u)
    else:
        t = np.tanh(u / params.alpha)
        hid, dphi = params.alpha * t, 1.0 - t * t
    y = _blend(params, hid) @ params.w2.T + params.b2
    if params.linear:
        return _Pass(y, dphi, np.ones_like(y))
    x = special.expit(y)
    return _Pass(x, dphi, x * (1.0 - x))


def _pullback(params, fwd, r):
    # vector-Jacobian product in cell layout
    dy = r * fwd.dsig
    du = _blend(params, dy @ params.w2) * fwd.dphi
    return du @ params.w1


def denoise(params, Z_T):
    """Z_0 = Q Z_T + b (orthogonal, hence exactly invertible and N(0, I)-preserving up to the shift)."""
    values = latent_array(params, Z_T).ravel()
    return LatentTensor.from_flat(params.mixing @ values + params.mixing_bias, params.latent_shape)


def invert_denoise(params, Z_0):
    values = latent_array(params, Z_0).ravel()
    return LatentTensor.from_flat(params.mixing.T @ (values - params.mixing_bias), params.latent_shape)


def decode_array(params, z):
    return _from_blocks(params, _forward(params, _to_cells(params, z)).x)


def decode_image(params, Z_0):
    return ImageTensor(decode_array(params, latent_array(params, Z_0)))


def encode_image(params, X):
    """
    Approximate left inverse of the decoder: un-squash, pseudo-invert W2,
    invert tanh on its open range, pseudo-invert W1. Works cell by cell and
    takes the blended hidden field for the unblended one, so it is exact on
    the decoder's range only when ``blend`` is 0. Pixels outside [0, 1] are
    clamped rather than rejected.
    """
    blocks = _to_blocks(params, image_array(params, X))
    if params.linear:
        hid = (blocks - params.b2) @ params.w2_pinv.T
        u = hid
    else:
        y = special.logit(np.clip(blocks, PIXEL_CLAMP, 1.0 - PIXEL_CLAMP))
        hid = (y - params.b2) @ params.w2_pinv.T
        limit = params.alpha * (1.0 - HIDDEN_MARGIN)
        u = params.alpha * np.arctanh(np.clip(hid, -limit, limit) / params.alpha)
    cells = (u - params.b1) @ params.w1_pinv.T
    return LatentTensor(_from_cells(params, cells))


class Linearization:
    """J_D frozen at one latent; products reuse a single forward pass."""

    def __init__(self, params, Z):
        self.params = params
        self._fwd = _forward(params, _to_cells(params, latent_array(params, Z)))

    def jvp(self, V):
        params = self.params
        dhid = _blend(params, (_to_cells(params, latent_array(params, V)) @ params.w1.T) * self._fwd.dphi)
        return _from_blocks(params, (dhid @ params.w2.T) * self._fwd.dsig)

    def vjp(self, R):
        params = self.params
        r = _to_blocks(params, image_array(params, R))
        return _from_cells(params, _pullback(params, self._fwd, r))


def jvp(params, Z, V):
    """J_D(Z) V, returned as an image-shaped array."""
    return Linearization(params, Z).jvp(V)


def vjp(params, Z, R):
    """J_D(Z)^T R, returned as a latent-shaped array."""
    return Linearization(params, Z).vjp(R)


def loss_grad_array(params, z, x_ref):
    """(loss, gradient, ||D(z) - x_ref||) on bare arrays; the optimizer's inner loop."""
    fwd = _forward(params, _to_cells(params, z))
    r = fwd.x - _to_blocks(params, x_ref)
    recon = float(np.sqrt(np.sum(r * r)))
    grad = _from_cells(params, _pullback(params, fwd, r))
    return 0.5 * recon * recon, grad, recon


def loss_and_gradient(params, Z, X_ref):
    """L(Z) = 1/2 ||D(Z) - X_ref||^2 and its gradient J_D(Z)^T (D(Z) - X_ref)."""
    loss, grad, _ = loss_grad_array(params, latent_array(params, Z), image_array(params, X_ref))
    return loss, LatentTensor(grad)
