"""Standard normal CDF and quantile function.

The quantile uses Acklam's rational approximation followed by one Halley
step against ``math.erfc``, which brings the error down to a few ulps.
"""

from __future__ import annotations

import math

import numpy as np

_A = (
    -3.969683028665376e01,
    2.209460984245205e02,
    -2.759285104469687e02,
    1.383577518672690e02,
    -3.066479806614716e01,
    2.506628277459239e00,
)
_B = (
    -5.447609879822406e01,
    1.615858368580409e02,
    -1.556989798598866e02,
    6.680131188771972e01,
    -1.328068155288572e01,
)
_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e00,
    -2.549732539343734e00,
    4.374664141464968e00,
    2.938163982698783e00,
)
_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e00,
    3.754408661907416e00,
)
_P_LOW = 0.02425
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def norm_cdf_scalar(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_cdf(x):
    """Standard normal CDF, elementwise for array input."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return norm_cdf_scalar(float(arr))
    flat = np.fromiter((norm_cdf_scalar(v) for v in arr.ravel()), dtype=float, count=arr.size)
    return flat.reshape(arr.shape)


def norm_ppf_scalar(p: float) -> float:
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")

    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )

    # Halley refinement
    e = norm_cdf_scalar(x) - p
    u = e * _SQRT2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def norm_ppf(p):
    """Standard normal quantile, elementwise for array input."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        return norm_ppf_scalar(float(arr))
    flat = np.fromiter((norm_ppf_scalar(v) for v in arr.ravel()), dtype=float, count=arr.size)
    return flat.reshape(arr.shape)
