"""Receiver-side latent refinement: gradient descent on 1/2 ||D(Z) - X'||^2."""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from codec.embedding import LatentTensor, latent_to_bits
from core.exceptions import InvalidInput, NumericFailure
from generator.lipschitz import certified_lipschitz, sampled_lipschitz
from generator.network import (
    encode_image, image_array, invert_denoise, latent_array, loss_grad_array,
)

from .config import AUTO
from .trace import BOUND_ATOL, OptimizationTrace, StepRecord

logger = logging.getLogger(__name__)

# the per-step bound is checked against the certified global constant, inflated
BOUND_INFLATION = 1.01


@dataclass(frozen=True)
class Checkpoint:
    steps: int
    latent: LatentTensor
    recon: float


class Extraction(NamedTuple):
    message: object
    trace: OptimizationTrace
    latent: LatentTensor
    recon: float


def resolve_eta(params, cfg):
    if cfg.eta_policy != AUTO:
        return cfg.eta
    estimate = sampled_lipschitz(
        params, cfg.lipschitz_probes, iters=cfg.lipschitz_iters, seed=cfg.lipschitz_seed,
    )
    if estimate.value == 0.0:
        raise NumericFailure("decoder Jacobian vanishes at every probe; cannot pick a step size")
    eta = cfg.auto_safety * 2.0 / estimate.value ** 2
    logger.debug("auto step size %.6g from L_J estimate %.6g", eta, estimate.value)
    return eta


def _check_finite(value, what, step, trace):
    if not np.all(np.isfinite(value)):
        raise NumericFailure(f"non-finite {what} at step {step}", trace=trace)


def _descend(params, Z_init, X_recv, cfg, marks):
    z = np.array(latent_array(params, Z_init), dtype=float)
    x_ref = image_array(params, X_recv)
    eta = resolve_eta(params, cfg) if cfg.steps else cfg.eta
    trace = OptimizationTrace(
        eta=eta, lipschitz=BOUND_INFLATION * certified_lipschitz(params), policy=cfg.eta_policy,
    )

    loss, grad, recon = loss_grad_array(params, z, x_ref)
    _check_finite(loss, 'loss', 0, trace)
    trace.initial_recon = recon
    snapshots = {}
    done = 0
    for i in range(cfg.steps):
        if i in marks:
            snapshots[i] = (z.copy(), recon)
        grad_norm = float(np.linalg.norm(grad))
        if cfg.grad_tol and grad_norm < cfg.grad_tol:
            logger.debug("gradient norm %.3g below tolerance at step %d", grad_norm, i)
            break

        z_next = z - eta * grad
        step_norm = float(np.linalg.norm(z_next - z))
        next_loss, next_grad, next_recon = loss_grad_array(params, z_next, x_ref)
        _check_finite(next_loss, 'loss', i + 1, trace)
        _check_finite(next_grad, 'gradient', i + 1, trace)

        if cfg.record_trace:
            bound = eta * trace.lipschitz * recon
            trace.append(StepRecord(
                step=i,
                loss=loss,
                grad_norm=grad_norm,
                step_norm=step_norm,
                bound_value=bound,
                bound_ok=step_norm <= bound + BOUND_ATOL,
                recon_norm=recon,
                z_norm=float(np.linalg.norm(z)),
                next_z_norm=float(np.linalg.norm(z_next)),
            ))
        if next_loss > loss:
            trace.loss_increases += 1
        logger.debug("step %d loss %.6g grad %.3g", i, loss, grad_norm)
        z, loss, grad, recon = z_next, next_loss, next_grad, next_recon
        done = i + 1

    trace.final_recon = recon
    if trace.loss_increases and cfg.eta_policy != AUTO:
        logger.warning("loss increased at %d of %d steps with fixed eta=%g", trace.loss_increases, done, eta)
    for mark in marks:
        if mark not in snapshots:
            snapshots[mark] = (z, recon)
    return snapshots, trace


def refine_latent(params, Z_init, X_recv, cfg):
    """
    Run ``cfg.steps`` updates Z <- Z - eta * grad L(Z) against the fixed X_recv.

    Returns the refined latent and its trace. A non-finite loss raises
    NumericFailure carrying the trace recorded so far.
    """
    snapshots, trace = _descend(params, Z_init, X_recv, cfg, {cfg.steps})
    z, _ = snapshots[cfg.steps]
    return LatentTensor(z), trace


def refine_checkpoints(params, Z_init, X_recv, cfg, checkpoints):
    """
    One descent to max(checkpoints), snapshotting the iterate at each requested
    step count. Each snapshot equals what refine_latent returns for that count.
    """
    marks = sorted({int(c) for c in checkpoints})
    if not marks or marks[0] < 0:
        raise InvalidInput("checkpoints must be non-empty and non-negative")
    snapshots, trace = _descend(params, Z_init, X_recv, cfg.with_steps(marks[-1]), set(marks))
    return [Checkpoint(m, LatentTensor(snapshots[m][0]), snapshots[m][1]) for m in marks], trace


def extract_with_optimization(params, X_recv, cfg):
    """Z'_0 = E(X'), refine, invert the denoiser, threshold at zero."""
    z_init = encode_image(params, X_recv)
    z_0, trace = refine_latent(params, z_init, X_recv, cfg)
    bits = latent_to_bits(invert_denoise(params, z_0))
    return Extraction(message=bits, trace=trace, latent=z_0, recon=trace.final_recon)
