"""Spectral-norm bounds on the decoder Jacobian."""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from codec.embedding import LatentTensor
from core.exceptions import InvalidInput

from .network import Linearization

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-6
DEFAULT_ITERATIONS = 2000


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    iterations: int
    residual: float
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def converged(self):
        return self.residual <= self.tolerance


def _top_singular_value(params, z, rng, iters, tol):
    lin = Linearization(params, z)
    v = rng.standard_normal(params.latent_shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    residual = np.inf
    for i in range(1, iters + 1):
        w = lin.vjp(lin.jvp(v))
        new_lam = float(np.vdot(v, w))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, i, 0.0
        residual = abs(new_lam - lam) / abs(new_lam)
        lam = new_lam
        v = w / norm
        if residual <= tol:
            break
    return np.sqrt(max(lam, 0.0)), i, residual


def estimate_lipschitz(params, probes=4, iters=DEFAULT_ITERATIONS, seed=0, at=None, tol=DEFAULT_TOLERANCE):
    """
    L_J = max over probe latents of the top singular value of J_D, each found by
    power iteration on J^T J built from jvp/vjp products.

    Probes are the latents in ``at`` plus ``probes`` draws from N(b, I), the law
    of Z_0 under embedding. Non-convergence is reported in ``residual``.
    """
    points = [p.values if isinstance(p, LatentTensor) else np.asarray(p, dtype=float) for p in (at or [])]
    if probes < 0 or (probes < 1 and not points):
        raise InvalidInput("estimate_lipschitz needs at least one probe")
    if iters < 10:
        raise InvalidInput("estimate_lipschitz needs iters >= 10")

    rng = np.random.default_rng(seed)
    bias = params.mixing_bias.reshape(params.latent_shape)
    points += [bias + rng.standard_normal(params.latent_shape) for _ in range(probes)]

    value, used, residual = 0.0, 0, 0.0
    for z in points:
        sigma, steps, res = _top_singular_value(params, z, rng, iters, tol)
        value = max(value, sigma)
        used = max(used, steps)
        residual = max(residual, res)

    if residual > tol:
        logger.warning("power iteration stopped at residual %.2e after %d iterations", residual, used)
    return LipschitzEstimate(value=float(value), iterations=used, residual=float(residual), tolerance=tol)


def certified_lipschitz(params):
    """
    Global bound max(sigma') * ||W2|| * max(phi') * ||W1|| on ||J_D(Z)||_2.

    J_D factors as diag(sigma') (I x W2) S diag(phi') (I x W1) over the cell
    grid and the blend S has norm at most 1, so this holds for every Z.
    """
    squash_slope = 1.0 if params.linear else 0.25
    return squash_slope * np.linalg.norm(params.w2, 2) * np.linalg.norm(params.w1, 2)


@lru_cache(maxsize=32)
def sampled_lipschitz(params, probes, iters=DEFAULT_ITERATIONS, seed=0, tol=DEFAULT_TOLERANCE):
    """
    ``estimate_lipschitz`` over random latents only, computed once per generator.

    The result depends on nothing but its arguments, and ``GeneratorParams``
    hashes by identity, so every trial against one generator shares it.
    """
    return estimate_lipschitz(params, probes=probes, iters=iters, seed=seed, tol=tol)
