"""Monte Carlo ensembles: hit counters, SBC ratios, CLT statistics, KS fit.

Trajectory starts are mu-distributed and counter-seeded per trajectory, so
an ensemble is a pure function of (map, schedule, n_max, M, seed) no matter
how it is scheduled across threads.  Doubling-map ensembles run through the
exact bit-stream kernel; other 1-D maps use float orbits; the 2-torus uses
a vectorized float loop.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import ndtr

from . import dynamics
from .backend import get_kernels
from .dynamics import MapSystem
from .errors import ParameterError
from .targets import TargetSchedule

QUANTS = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass
class EnsembleSummary:
    map_name: str
    schedule_name: str
    seed: int
    M: int
    n_max: int
    checkpoints: np.ndarray  # (ncp,)
    E: np.ndarray  # E_n at checkpoints
    S: np.ndarray  # raw per-trajectory counts, (M, ncp)
    mean_S: np.ndarray
    var_S: np.ndarray  # population variance of S_n == ahat_n^2
    mean_ratio: np.ndarray
    std_ratio: np.ndarray
    ks_paper: np.ndarray  # KS of Z/sqrt(log n) against Phi (nan where log n <= 0)
    ks_self: np.ndarray  # KS of Z/ahat_n against Phi (nan where ahat_n = 0)
    quantiles: np.ndarray  # (ncp, len(QUANTS)) of the paper-normed statistic

    @property
    def Z(self):
        return self.S - self.E[None, :]

    @property
    def ahat2(self):
        return self.var_S


def sbc_ratio(S_n, E_n):
    """S_n / E_n (the strong Borel-Cantelli ratio)."""
    if np.any(np.asarray(E_n) <= 0.0):
        raise ZeroDivisionError("E_n must be positive")
    return np.asarray(S_n, dtype=np.float64) / E_n


def normalized_statistic(Z_n, mode: str, log_n: float = None, a_hat: float = None):
    """Z_n / sqrt(log n) ('paper-norm') or Z_n / a_hat ('self-norm')."""
    if mode == "paper-norm":
        if log_n is None or log_n <= 0.0:
            raise ParameterError("paper-norm mode needs log n > 0")
        return np.asarray(Z_n, dtype=np.float64) / math.sqrt(log_n)
    if mode == "self-norm":
        if a_hat is None or a_hat <= 0.0:
            raise ParameterError("self-norm mode needs a_hat > 0")
        return np.asarray(Z_n, dtype=np.float64) / a_hat
    raise ParameterError(f"unknown normalization mode {mode!r}")


def ks_distance(samples) -> float:
    """sup |F_hat - Phi| over the sample points (two-sided formula)."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    if x.size == 0:
        raise ParameterError("ks_distance needs at least one sample")
    M = x.size
    cdf = ndtr(x)
    hi = np.arange(1, M + 1) / M - cdf
    lo = cdf - np.arange(0, M) / M
    return float(max(hi.max(), lo.max()))


def _torus_hits(m: MapSystem, schedule, M, seed, n, cps):
    kx, ky = m.params
    starts = dynamics.sample_initial(m, seed, M)
    x, y = starts[:, 0].copy(), starts[:, 1].copy()
    px, py = schedule.p
    S = np.zeros((M, len(cps)), dtype=np.int64)
    cnt = np.zeros(M, dtype=np.int64)
    ci = 0
    for j in range(1, n + 1):
        x = (kx * x) % 1.0
        y = (ky * y) % 1.0
        dx = np.abs(x - px)
        dx = np.minimum(dx, 1.0 - dx)
        dy = np.abs(y - py)
        dy = np.minimum(dy, 1.0 - dy)
        cnt += dx * dx + dy * dy < schedule.r[j - 1] ** 2
        if ci < len(cps) and j == cps[ci]:
            S[:, ci] = cnt
            ci += 1
    return S


def run_ensemble(
    m: MapSystem,
    schedule: TargetSchedule,
    n_max: int,
    M: int,
    seed: int,
    checkpoints,
) -> EnsembleSummary:
    """M trajectories, S_n and Z_n recorded at the checkpoints."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0:
        raise ParameterError("checkpoints must be nonempty")
    if (np.diff(cps) <= 0).any():
        raise ParameterError("checkpoints must be strictly increasing")
    if cps[0] < 1 or cps[-1] > n_max or n_max > schedule.n_max:
        raise ParameterError("checkpoints must lie in [1, n_max] within the schedule")
    if M < 1:
        raise ParameterError("M must be >= 1")
    kern = get_kernels()
    if schedule.scaled_lo is not None:
        S = kern.bit_orbit_hits(
            int(seed), int(M), int(n_max), schedule.scaled_lo,
            schedule.scaled_width, cps,
        )
    elif m.domain == "torus":
        S = _torus_hits(m, schedule, M, seed, n_max, cps)
    else:
        starts = np.asarray(dynamics.sample_initial(m, seed, M), dtype=np.float64)
        if m.kind == "gauss":
            b = np.zeros(0)
            blo, bhi, bsl, bic = b, b, b, b
            is_gauss = True
        else:
            br = np.asarray(m.branches, dtype=np.float64)
            blo, bhi, bsl, bic = br[:, 0], br[:, 1], br[:, 2], br[:, 3]
            is_gauss = False
        S = kern.float_orbit_hits(
            starts, blo, bhi, bsl, bic, is_gauss, float(schedule.p),
            schedule.r, int(n_max), cps,
        )
    E = schedule.E[cps - 1]
    Z = S - E[None, :]
    var_S = S.var(axis=0)  # population variance; equals Var(Z_n)
    mean_ratio = (S / E[None, :]).mean(axis=0)
    std_ratio = (S / E[None, :]).std(axis=0)
    ncp = cps.size
    ks_paper = np.full(ncp, np.nan)
    ks_self = np.full(ncp, np.nan)
    quants = np.full((ncp, len(QUANTS)), np.nan)
    for c in range(ncp):
        ln = math.log(cps[c])
        if ln > 0.0:
            stat = normalized_statistic(Z[:, c], "paper-norm", log_n=ln)
            ks_paper[c] = ks_distance(stat)
            quants[c] = np.quantile(stat, QUANTS)
        ah = math.sqrt(var_S[c]) if var_S[c] > 0 else 0.0
        if ah > 0.0:
            ks_self[c] = ks_distance(
                normalized_statistic(Z[:, c], "self-norm", a_hat=ah)
            )
    return EnsembleSummary(
        map_name=m.name,
        schedule_name=schedule.name,
        seed=int(seed),
        M=int(M),
        n_max=int(n_max),
        checkpoints=cps,
        E=E,
        S=S,
        mean_S=S.mean(axis=0),
        var_S=var_S,
        mean_ratio=mean_ratio,
        std_ratio=std_ratio,
        ks_paper=ks_paper,
        ks_self=ks_self,
        quantiles=quants,
    )
