"""Closed-form lag covariances for the doubling map.

For Lebesgue measure and arcs A = [a, a+alpha), B = [b, b+beta) the overlap
lambda(A cap T^{-m}B) has a closed form: T^{-m}B is 2^m scaled copies of B,
and the measure of [0,t) cap T^{-m}B is floor(t 2^m) beta/2^m plus a partial
arc term.  All products by 2^m are exact in binary floating point, so these
covariances carry no quadrature error; beyond lag ~54 they vanish to exactly
zero, which is why the default lag cap of 60 loses nothing.

This module is the exact backend for the non-stationary variance a_n^2, the
(SP) correlation sums and short-return measures on metric-ball schedules.
"""

import numpy as np

from . import _kernels_numpy as _np_k
from .backend import get_kernels
from .errors import ParameterError, UnsupportedMapError

LAG_CAP = 60  # beyond this the closed-form covariance is exactly zero


def arc_overlap(a, alpha, b, beta, m):
    """lambda([a,a+alpha) cap T^{-m}[b,b+beta)) on the circle, vectorized."""
    if np.any(np.asarray(m) < 0):
        raise ParameterError("lag must be >= 0")
    pm = np.exp2(np.asarray(m, dtype=np.float64))
    return _np_k.pre_olap(
        np.asarray(a) % 1.0, np.asarray(alpha), np.asarray(b) % 1.0,
        np.asarray(beta), pm,
    )


def cov_lag(a, alpha, b, beta, m):
    """Cov(1_A, 1_B o T^m) for arcs under Lebesgue measure."""
    return arc_overlap(a, alpha, b, beta, m) - np.asarray(alpha) * np.asarray(beta)


def _schedule_arcs(schedule):
    if schedule.scaled_lo is None:
        raise UnsupportedMapError(
            "the closed-form covariance engine needs a doubling-map schedule"
        )
    a = schedule.scaled_lo.astype(np.float64) * 2.0 ** -60
    return a, schedule.mu


def cross_sum_series(schedule, n: int = None, lag_cap: int = LAG_CAP):
    """Per-index cross sums c_j = sum_{m>=1} Cov(f_{j-m}, f_j o T^m).

    The sum of c over indices <= n is the full i<j covariance cross term of
    the hit counter at horizon n.
    """
    a, alpha = _schedule_arcs(schedule)
    if n is None:
        n = schedule.n_max
    if not 1 <= n <= schedule.n_max:
        raise ParameterError("n outside the schedule horizon")
    return get_kernels().cross_sums(a[:n], alpha[:n], lag_cap)


def variance_curve(schedule, checkpoints, lag_cap: int = LAG_CAP):
    """a_n^2 = Var(S_n) at each checkpoint, exactly (closed-form engine)."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0 or (cps < 1).any() or cps.max() > schedule.n_max:
        raise ParameterError("checkpoints must lie in 1..n_max")
    n = int(cps.max())
    a, alpha = _schedule_arcs(schedule)
    c = get_kernels().cross_sums(a[:n], alpha[:n], lag_cap)
    diag = alpha[:n] * (1.0 - alpha[:n])
    tot = np.cumsum((diag + 2.0 * c).astype(np.longdouble))
    return np.maximum(tot[cps - 1].astype(np.float64), 0.0)


def window_pair_sum(
    schedule, m: int, n: int, lag_cap: int = LAG_CAP, absolute: bool = False
):
    """sum_{m<=i<j<=n} Cov(f_i, f_j o T^{j-i}) (1-based window ends).

    absolute=True sums |Cov| per pair instead (the form the correlation-sum
    property is applied in)."""
    if not 1 <= m <= n <= schedule.n_max:
        raise ParameterError("need 1 <= m <= n <= n_max")
    a, alpha = _schedule_arcs(schedule)
    aw, alw = a[m - 1 : n], alpha[m - 1 : n]
    if not absolute:
        c = get_kernels().cross_sums(aw, alw, lag_cap)
        return float(np.sum(c))
    nn = aw.size
    tot = 0.0
    for lag in range(1, min(lag_cap, nn - 1) + 1):
        i = np.arange(0, nn - lag)
        j = i + lag
        cov = _np_k.pre_olap(aw[i], alw[i], aw[j], alw[j], 2.0 ** lag) \
            - alw[i] * alw[j]
        tot += float(np.sum(np.abs(cov)))
    return tot


def short_return_overlap(schedule, i: int, r: int):
    """mu(B_i cap T^{-r}B_i), exact (doubling metric-ball schedules)."""
    a, alpha = _schedule_arcs(schedule)
    return float(arc_overlap(a[i - 1], alpha[i - 1], a[i - 1], alpha[i - 1], r))
