"""
Statistical checks that stego latents look like N(0, 1) noise and that the
intermediate uniforms look like Uniform(0, 1).

Only sender-side quantities are examined; nothing the receiver computes enters here.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from codec.embedding import LatentTensor, UniformVector, embed
from codec.messages import StegoKey, random_message
from codec.normal import inverse_normal_cdf
from core.exceptions import InvalidInput

logger = logging.getLogger(__name__)

DEFAULT_SIGNIFICANCE = 0.01
MIN_KS_SAMPLE = 100
MIN_UNIFORM_SAMPLE = 1000
MIN_BINS = 8
SAMPLES_PER_BIN = 100
BALANCE_SIGMAS = 3.0
KL_REFERENCE_FACTOR = 2.0


@dataclass(frozen=True)
class GoodnessReport:
    test: str
    n: int
    statistic: float
    p_value: float = None
    passed: bool = True
    significance: float = DEFAULT_SIGNIFICANCE
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise InvalidInput(f"p-value {self.p_value} outside [0, 1]")


def _sample(Z):
    """Flatten a latent, an array, or a batch (list) of latents into one sample."""
    if isinstance(Z, (list, tuple)):
        return np.concatenate([_sample(z) for z in Z]) if Z else np.empty(0)
    if isinstance(Z, LatentTensor):
        return Z.flat
    if isinstance(Z, UniformVector):
        return Z.values
    return np.asarray(Z, dtype=float).ravel()


def ks_test_gaussian(Z, alpha=DEFAULT_SIGNIFICANCE):
    """One-sample KS against Phi with the asymptotic Kolmogorov p-value."""
    x = _sample(Z)
    if x.size < MIN_KS_SAMPLE:
        raise InvalidInput(f"KS test needs at least {MIN_KS_SAMPLE} samples, got {x.size}")
    result = stats.kstest(x, 'norm', method='asymp')
    p = float(np.clip(result.pvalue, 0.0, 1.0))
    return GoodnessReport(
        test='ks_gaussian', n=int(x.size), statistic=float(result.statistic),
        p_value=p, passed=p > alpha, significance=alpha,
    )


def gaussian_bin_edges(bins):
    """Interior edges Phi^-1(j / bins): every bin has probability 1/bins under N(0, 1)."""
    return inverse_normal_cdf(np.arange(1, bins) / bins)


def empirical_kl(Z, bins=64):
    """KL(binned sample || binned N(0, 1)) in nats; empty bins count as one observation."""
    x = _sample(Z)
    if bins < MIN_BINS:
        raise InvalidInput(f"empirical KL needs at least {MIN_BINS} bins")
    if x.size < SAMPLES_PER_BIN * bins:
        raise InvalidInput(f"empirical KL with {bins} bins needs {SAMPLES_PER_BIN * bins} samples, got {x.size}")
    counts = np.bincount(np.searchsorted(gaussian_bin_edges(bins), x, side='right'), minlength=bins)
    counts = np.where(counts == 0, 1, counts).astype(float)
    p = counts / counts.sum()
    return float(np.sum(p * np.log(p * bins)))


def kl_reference(size, bins=64, seed=0, draws=4):
    """Mean empirical KL of genuine N(0, 1) samples of ``size``: the finite-sample floor."""
    rng = np.random.default_rng(seed)
    return float(np.mean([empirical_kl(rng.standard_normal(size), bins) for _ in range(draws)]))


def uniformity_test(S, ones_rate=0.5, alpha=DEFAULT_SIGNIFICANCE):
    """
    KS against Uniform(0, 1) plus a balance check: the fraction of values in
    [0.5, 1) must be within three binomial sigmas of ``ones_rate``.
    """
    s = _sample(S)
    if s.size < MIN_UNIFORM_SAMPLE:
        raise InvalidInput(f"uniformity test needs at least {MIN_UNIFORM_SAMPLE} samples, got {s.size}")
    result = stats.kstest(s, 'uniform', method='asymp')
    p = float(np.clip(result.pvalue, 0.0, 1.0))
    upper = float(np.mean(s >= 0.5))
    sigma = np.sqrt(ones_rate * (1.0 - ones_rate) / s.size)
    balanced = bool(upper == ones_rate if sigma == 0 else abs(upper - ones_rate) <= BALANCE_SIGMAS * sigma)
    return GoodnessReport(
        test='ks_uniform', n=int(s.size), statistic=float(result.statistic),
        p_value=p, passed=p > alpha and balanced, significance=alpha,
        detail={
            'ks_pass': p > alpha,
            'upper_fraction': upper,
            'expected_ones_rate': float(ones_rate),
            'balance_ok': bool(balanced),
        },
    )


def kl_report(Z, bins=64, seed=0):
    """empirical_kl against the same-size genuine-Gaussian floor; passes within 2x of it."""
    x = _sample(Z)
    bins = min(bins, x.size // SAMPLES_PER_BIN)
    kl = empirical_kl(x, bins)
    reference = kl_reference(x.size, bins, seed=seed)
    return GoodnessReport(
        test='empirical_kl', n=int(x.size), statistic=kl, p_value=None,
        passed=kl <= KL_REFERENCE_FACTOR * reference, significance=None,
        detail={'bins': bins, 'reference': reference},
    )


def latent_security_report(Z, S, ones_rate=0.5, alpha=DEFAULT_SIGNIFICANCE):
    """The sender-side suite for one embedding: Gaussianity of Z, KL floor, uniformity of S."""
    reports = [ks_test_gaussian(Z, alpha)]
    if _sample(Z).size >= SAMPLES_PER_BIN * MIN_BINS:
        reports.append(kl_report(Z))
    reports.append(uniformity_test(S, ones_rate, alpha))
    for report in reports:
        logger.info("%s n=%d statistic=%.6g pass=%s", report.test, report.n, report.statistic, report.passed)
    return reports


def suite_pass_rate(runs=200, size=65536, alpha=DEFAULT_SIGNIFICANCE, master_seed=0, mode='random'):
    """Fraction of re-seeded random-message embeddings whose latents pass ks_test_gaussian."""
    if runs < 1:
        raise InvalidInput("suite_pass_rate needs at least one run")
    reports = []
    for run in range(runs):
        rng = np.random.default_rng([master_seed, run])
        msg = random_message(size, rng)
        key = StegoKey(int(rng.integers(0, 2 ** 63)))
        reports.append(ks_test_gaussian(embed(msg, key, (size, 1, 1), mode=mode), alpha))
    rate = sum(r.passed for r in reports) / runs
    logger.info("KS pass rate %.3f over %d runs at alpha=%g", rate, runs, alpha)
    return rate, reports
