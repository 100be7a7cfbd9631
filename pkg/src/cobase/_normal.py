"""Standard normal CDF, PDF and quantile function.

The quantile uses Acklam's rational approximation (relative error about
1.2e-9) followed by one Newton step against the erfc-based CDF, which brings
the round-trip error ``|cdf(ppf(p)) - p|`` down to machine precision.
"""
import numpy as np
from scipy.special import erfc

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _acklam_lower(q):
    """Initial quantile estimate for probabilities ``q`` in (0, 0.5]."""
    x = np.empty_like(q)
    tail = q < _P_LOW
    if np.any(tail):
        r = np.sqrt(-2.0 * np.log(q[tail]))
        x[tail] = (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / (
            (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        )
    mid = ~tail
    if np.any(mid):
        u = q[mid] - 0.5
        r = u * u
        x[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * u / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    return x


def norm_ppf(p):
    """Standard normal quantile for ``p`` in (0, 1); 0 and 1 map to -inf/+inf."""
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    if np.any((p < 0) | (p > 1) | np.isnan(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    upper = p > 0.5
    # 1 - p is exact for p in [0.5, 1], so the upper tail keeps full precision
    q = np.where(upper, 1.0 - p, p)
    out = np.full_like(q, -np.inf)
    ok = q > 0
    qq = q[ok]
    x = _acklam_lower(qq)
    x = x - (norm_cdf(x) - qq) / norm_pdf(x)
    out[ok] = x
    out = np.where(upper, -out, out)
    return out[0] if scalar else out
