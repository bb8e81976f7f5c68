"""Discrete Laplace transforms of measured time series.

All three quadratures are plain rectangle rules on the stored samples,
matching the data pathway used to synthesize the experiments: values,
s-derivatives and shifted Taylor moments of the transfer function.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .errors import RomresError
from .forward import TimeSeries

__all__ = ["laplace_transform", "laplace_derivative", "laplace_moments"]

_EXP_UNDERFLOW = -746.0


def _check(series: TimeSeries, s: float):
    if series.n_samples == 0:
        raise RomresError("empty time series")
    if s < 0:
        raise RomresError("Laplace variable must be nonnegative")


def _active_slice(series: TimeSeries, s: float) -> int:
    # samples past this index multiply an exactly-zero kernel
    if s <= 0:
        return series.n_samples
    k = int(np.floor(-_EXP_UNDERFLOW / (s * series.step))) + 1
    return min(series.n_samples, max(k, 1))


def laplace_transform(series: TimeSeries, s: float) -> float:
    """Rectangle-rule value of int_0^inf d(t) exp(-s t) dt."""
    _check(series, s)
    n = _active_slice(series, s)
    t = series.step * np.arange(1, n + 1)
    return series.step * float(np.dot(series.samples[:n], np.exp(-s * t)))


def laplace_derivative(series: TimeSeries, s: float) -> float:
    """Rectangle-rule value of -int_0^inf d(t) t exp(-s t) dt."""
    _check(series, s)
    n = _active_slice(series, s)
    t = series.step * np.arange(1, n + 1)
    return -series.step * float(np.dot(series.samples[:n] * t, np.exp(-s * t)))


def laplace_moments(series: TimeSeries, s_hat: float, K: int) -> np.ndarray:
    """Taylor coefficients tau_0..tau_{K-1} of the transform at s_hat.

    tau_k = ((-1)^k / k!) * h_T * sum_j d_j t_j^k exp(-s_hat t_j).  The
    weights are accumulated as exp(k log t - s_hat t - log k!) so that large
    k and long horizons cannot overflow t^k.
    """
    _check(series, s_hat)
    if K < 1:
        raise RomresError("need at least one moment")
    n = _active_slice(series, s_hat)
    t = series.step * np.arange(1, n + 1)
    log_t = np.log(t)
    tau = np.empty(K)
    sign = 1.0
    for k in range(K):
        w = np.exp(k * log_t - s_hat * t - gammaln(k + 1))
        tau[k] = sign * series.step * float(np.dot(series.samples[:n], w))
        sign = -sign
    return tau
