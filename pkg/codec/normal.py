"""Standard normal CDF and a high-accuracy inverse CDF."""

import numpy as np
from scipy import special

from core.exceptions import InvalidInput

# probabilities are clamped to [EPS, 1 - EPS] so latents stay finite
EPS = 2.0 ** -40

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)

# Acklam's rational approximation, relative error ~1.15e-9 before refinement
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def normal_cdf(x):
    """Phi(x) through the complementary error function (accurate in the lower tail)."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / _SQRT2)


def _lower_tail_guess(q):
    # q in (0, 0.5]; returns z <= 0
    z = np.empty_like(q)

    tail = q < _P_LOW
    if tail.any():
        r = np.sqrt(-2.0 * np.log(q[tail]))
        num = ((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]
        den = (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        z[tail] = num / den

    central = ~tail
    if central.any():
        t = q[central] - 0.5
        r = t * t
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * t
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        z[central] = num / den

    return z


def inverse_normal_cdf(p):
    """
    Quantile function of the standard normal distribution.

    Works on scalars or arrays. The lower tail q = min(p, 1 - p) is evaluated
    and mirrored, so the result is antisymmetric whenever 1 - p is exact.
    One Halley step against ``normal_cdf`` takes the rational guess to
    |Phi(z) - p| <= 1e-12 over [1e-10, 1 - 1e-10].
    """
    arr = np.asarray(p, dtype=float)
    if np.isnan(arr).any():
        raise InvalidInput("inverse_normal_cdf: probability is NaN")

    flat = np.clip(arr, EPS, 1.0 - EPS).ravel()
    upper = flat > 0.5
    q = np.where(upper, 1.0 - flat, flat)

    z = _lower_tail_guess(q)
    e = normal_cdf(z) - q
    u = e * _SQRT2PI * np.exp(0.5 * z * z)
    z = z - u / (1.0 + 0.5 * z * u)
    z = np.where(upper, -z, z)

    if arr.ndim == 0:
        return float(z[0])
    return z.reshape(arr.shape)
