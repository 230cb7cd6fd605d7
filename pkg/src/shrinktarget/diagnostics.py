"""Hypothesis checkers: short returns, (SP) sums, Gal-Koksma residuals,
recurrence sets and the quasi-Hoelder seminorm.

Everything here is a falsifiable runtime check of an assumption the limit
theorems rest on.  Piecewise-linear maps get exact branchwise computations;
other maps fall back to Monte Carlo with reported standard errors, and an
inconclusive Monte Carlo comparison is reported as such, never as a pass.
"""

from dataclasses import dataclass
from typing import NamedTuple
import math

import numpy as np

from . import correlations, dynamics, mcstats, targets
from .dynamics import MapSystem
from .errors import ParameterError, ResourceLimitError, UnsupportedMapError
from .targets import TargetSchedule


@dataclass(frozen=True)
class AssumptionCParams:
    """Short-return exponents: ratio mu(B cap T^-r B) / mu(B)^(1+eta) is
    checked for r = 1..ceil((log i)^kappa).  eta in (0,1) is the standard
    regime; values in [1,2) are accepted and flagged as 'extended'."""

    eta: float = 0.5
    kappa: float = 1.5
    i_threshold: int = 100

    def __post_init__(self):
        if not 0.0 < self.eta < 2.0:
            raise ParameterError("eta must lie in (0, 2)")
        if self.kappa <= 1.0:
            raise ParameterError("kappa must exceed 1")

    @property
    def regime(self):
        return "standard" if self.eta < 1.0 else "extended"


class ReturnMeasure(NamedTuple):
    value: float
    se: float  # 0 in exact mode
    mode: str  # 'exact' or 'monte-carlo'


# ---------------------------------------------------------------------------
# branch composition (piecewise-linear T^k)
# ---------------------------------------------------------------------------

def compose_branches(m: MapSystem, k: int, cap: int = 10 ** 7):
    """Branches of T^k as arrays (lo, hi, slope, intercept)."""
    if m.branches is None:
        raise UnsupportedMapError("branch composition needs a piecewise-linear map")
    if k < 1:
        raise ParameterError("k must be >= 1")
    base = np.asarray(m.branches, dtype=np.float64)
    bl, bh, bs, bc = base[:, 0], base[:, 1], base[:, 2], base[:, 3]
    edges = np.unique(np.concatenate([bl, bh]))
    L, H, S, C = bl.copy(), bh.copy(), bs.copy(), bc.copy()
    for _ in range(k - 1):
        # image interval of each current branch
        y0 = S * L + C
        y1 = S * H + C
        ylo = np.minimum(y0, y1)
        yhi = np.maximum(y0, y1)
        i0 = np.searchsorted(edges, ylo, side="right")
        i1 = np.searchsorted(edges, yhi, side="left")
        pieces = np.maximum(i1 - i0, 0) + 1
        total = int(pieces.sum())
        if total > cap:
            raise ResourceLimitError(
                f"branch composition would need {total} pieces (cap {cap})"
            )
        rep = np.repeat(np.arange(L.size), pieces)
        offs = np.concatenate([[0], np.cumsum(pieces)])[:-1]
        t = np.arange(total) - np.repeat(offs, pieces)  # piece index in branch
        ya = np.where(t == 0, ylo[rep], edges[np.minimum(i0[rep] + t - 1, len(edges) - 1)])
        yb = np.where(
            t == pieces[rep] - 1, yhi[rep],
            edges[np.minimum(i0[rep] + t, len(edges) - 1)],
        )
        xa = (ya - C[rep]) / S[rep]
        xb = (yb - C[rep]) / S[rep]
        nl = np.minimum(xa, xb)
        nh = np.maximum(xa, xb)
        nl = np.maximum(nl, L[rep])
        nh = np.minimum(nh, H[rep])
        keep = nh > nl + 1e-18
        nl, nh, rep2 = nl[keep], nh[keep], rep[keep]
        ymid = S[rep2] * 0.5 * (nl + nh) + C[rep2]
        bidx = np.clip(np.searchsorted(bl, ymid, side="right") - 1, 0, bl.size - 1)
        S = bs[bidx] * S[rep2]
        C = bs[bidx] * C[rep2] + bc[bidx]
        L, H = nl, nh
    order = np.argsort(L)
    return L[order], H[order], S[order], C[order]


def _measure_union(m: MapSystem, lo, hi):
    """mu of a disjoint union of intervals (vectorized)."""
    lens = np.maximum(np.asarray(hi) - np.asarray(lo), 0.0)
    return float(np.sum(targets._arc_measure_vec(m, np.asarray(lo), lens)))


# ---------------------------------------------------------------------------
# short returns / Assumption (C)
# ---------------------------------------------------------------------------

def _arc_pieces(lo, length):
    """Arc [lo, lo+length) mod 1 as up to two plain intervals."""
    lo = lo % 1.0
    hi = lo + length
    if hi <= 1.0:
        return [(lo, hi)]
    return [(lo, 1.0), (0.0, hi - 1.0)]


def short_return_measure(
    m: MapSystem,
    schedule: TargetSchedule,
    i: int,
    r: int,
    mode: str = "auto",
    mc_samples: int = 200000,
    mc_seed: int = 12345,
) -> ReturnMeasure:
    """mu(B_i cap T^{-r} B_i).

    Exact closed form on doubling metric-ball schedules, exact branchwise
    interval arithmetic for other piecewise-linear maps, Monte Carlo with a
    standard error otherwise (or when forced with mode='monte-carlo')."""
    if r < 1:
        raise ParameterError("return lag must be >= 1")
    if not 1 <= i <= schedule.n_max:
        raise ParameterError("index outside the schedule")
    if mode not in ("auto", "exact", "monte-carlo"):
        raise ParameterError(f"unknown mode {mode!r}")
    if mode != "monte-carlo":
        if schedule.scaled_lo is not None and schedule.kind in ("ball", "dyadic"):
            return ReturnMeasure(
                correlations.short_return_overlap(schedule, i, r), 0.0, "exact"
            )
        if m.branches is not None:
            L, H, S, C = compose_branches(m, r)
            mu_i = schedule.mu[i - 1]
            if mu_i >= 1.0:
                return ReturnMeasure(1.0, 0.0, "exact")
            arc = _arc_pieces(schedule.p - schedule.r[i - 1], 2.0 * schedule.r[i - 1])
            tot = 0.0
            for a, b in arc:
                # preimage of [a,b) under each branch of T^r, clipped to B_i
                xa = (a - C) / S
                xb = (b - C) / S
                plo = np.maximum(np.minimum(xa, xb), L)
                phi_ = np.minimum(np.maximum(xa, xb), H)
                for aa, bb in arc:
                    lo2 = np.maximum(plo, aa)
                    hi2 = np.minimum(phi_, bb)
                    sel = hi2 > lo2
                    if sel.any():
                        tot += _measure_union(m, lo2[sel], hi2[sel])
            return ReturnMeasure(tot, 0.0, "exact")
        if mode == "exact":
            raise UnsupportedMapError("no exact short-return path for this map")
    # Monte Carlo
    pts = dynamics.sample_initial(m, mc_seed, mc_samples)
    if m.domain == "torus":
        raise UnsupportedMapError("short returns on the torus are not implemented")
    inb0 = np.array([targets.membership(schedule, i, x) for x in pts])
    hits = 0
    idx = np.nonzero(inb0)[0]
    for j in idx:
        y = dynamics.iterate(m, float(pts[j]), r)
        if targets.membership(schedule, i, y):
            hits += 1
    p = hits / mc_samples
    se = math.sqrt(max(p * (1.0 - p), 1.0 / mc_samples) / mc_samples)
    return ReturnMeasure(p, se, "monte-carlo")


@dataclass
class AssumptionCReport:
    params: AssumptionCParams
    indices: np.ndarray
    worst_ratio: np.ndarray  # max_r mu(B cap T^-r B)/mu(B)^(1+eta)
    worst_r: np.ndarray
    status: np.ndarray  # 'pass' | 'fail' | 'inconclusive' per index
    mode: str

    @property
    def all_pass(self):
        return bool((self.status == "pass").all())


def assumption_c_report(
    m: MapSystem,
    schedule: TargetSchedule,
    params: AssumptionCParams,
    i_range,
) -> AssumptionCReport:
    """Check mu(B_i cap T^-r B_i) <= mu(B_i)^(1+eta) for r <= ceil((log i)^kappa).

    Indices below params.i_threshold are skipped (the hypothesis is only
    asked of all sufficiently large i)."""
    idx = np.asarray(sorted(set(int(i) for i in i_range)), dtype=np.int64)
    idx = idx[idx >= params.i_threshold]
    if idx.size == 0:
        return AssumptionCReport(
            params, idx, np.zeros(0), np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=object), "exact",
        )
    if (idx > schedule.n_max).any():
        raise ParameterError("i_range exceeds the schedule horizon")
    mu = schedule.mu[idx - 1]
    bound = mu ** (1.0 + params.eta)
    rmax = np.ceil(np.log(idx) ** params.kappa).astype(np.int64)
    worst = np.full(idx.size, -np.inf)
    worst_r = np.zeros(idx.size, dtype=np.int64)
    exact = schedule.scaled_lo is not None or m.branches is not None
    ses = np.zeros(idx.size)
    if schedule.scaled_lo is not None:
        a = schedule.scaled_lo.astype(np.float64) * 2.0 ** -60
        al = schedule.mu
        for r in range(1, int(rmax.max()) + 1):
            sub = rmax >= r
            ii = idx[sub] - 1
            ov = correlations.arc_overlap(a[ii], al[ii], a[ii], al[ii], r)
            ratio = ov / bound[sub]
            tmp = worst[sub]
            upd = ratio > tmp
            tmp[upd] = ratio[upd]
            worst[sub] = tmp
            tr = worst_r[sub]
            tr[upd] = r
            worst_r[sub] = tr
    else:
        for s_, i in enumerate(idx):
            for r in range(1, int(rmax[s_]) + 1):
                rm = short_return_measure(m, schedule, int(i), r)
                ratio = rm.value / bound[s_]
                if ratio > worst[s_]:
                    worst[s_] = ratio
                    worst_r[s_] = r
                    ses[s_] = rm.se / bound[s_]
    status = np.empty(idx.size, dtype=object)
    for s_ in range(idx.size):
        if exact or ses[s_] == 0.0:
            status[s_] = "pass" if worst[s_] <= 1.0 else "fail"
        elif worst[s_] + 3.0 * ses[s_] <= 1.0:
            status[s_] = "pass"
        elif worst[s_] - 3.0 * ses[s_] > 1.0:
            status[s_] = "fail"
        else:
            status[s_] = "inconclusive"
    return AssumptionCReport(
        params, idx, worst, worst_r, status, "exact" if exact else "monte-carlo"
    )


# ---------------------------------------------------------------------------
# (SP) property
# ---------------------------------------------------------------------------

def sp_constant(model, schedule: TargetSchedule, m_lo: int, n_hi: int):
    """(C, raw correlation sum) for the window m_lo..n_hi.

    C is the smallest constant with
    sum_{m<=i<j<=n} |E(f_i f_j) - E(f_i)E(f_j)| <= C sum_{i} E(f_i),
    i.e. the absolute pair sum over the expectation sum (the form the
    correlation-sum property gets applied in); the raw signed pair sum is
    returned alongside."""
    if not 1 <= m_lo <= n_hi <= schedule.n_max:
        raise ParameterError("need 1 <= m <= n <= n_max")
    denom = float(np.sum(schedule.mu[m_lo - 1 : n_hi]))
    if m_lo == n_hi:
        return 0.0, 0.0
    if schedule.scaled_lo is not None:
        raw = correlations.window_pair_sum(schedule, m_lo, n_hi)
        absum = correlations.window_pair_sum(schedule, m_lo, n_hi, absolute=True)
        return absum / denom, raw
    if model is None:
        raise ParameterError("need a transfer model for non-doubling schedules")
    from . import transfer  # local import to avoid a cycle

    cap = transfer._cross_lag_cap(model)
    raw = 0.0
    absum = 0.0
    phis = {
        k: transfer._observable(model, schedule, k) for k in range(m_lo, n_hi + 1)
    }
    for i in range(m_lo, n_hi + 1):
        g = phis[i]
        for j in range(i + 1, min(i + cap, n_hi) + 1):
            g = model.apply(g)
            cov = model.integrate(g * phis[j])
            raw += cov
            absum += abs(cov)
    return absum / denom, raw


# ---------------------------------------------------------------------------
# Gal-Koksma residuals
# ---------------------------------------------------------------------------

def gal_koksma_residual(f, g, h, n_grid, eps: float = 0.1):
    """R(n) = |sum_{k<=n} (f_k - g_k)| / (Theta^{1/2} (log Theta)^{3/2+eps})
    with Theta(n) = sum_{k<=n} h_k, over the grid of horizons.

    Points with Theta <= 1 are skipped (returned as nan with a flag)."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if not (f.shape == g.shape == h.shape):
        raise ParameterError("f, g, h must have equal length")
    if (g < -1e-12).any() or (g > h + 1e-12).any() or (h > 1 + 1e-12).any():
        raise ParameterError("need 0 <= g_k <= h_k <= 1")
    grid = np.asarray(n_grid, dtype=np.int64)
    if (grid < 1).any() or grid.max() > f.size:
        raise ParameterError("n grid outside the series range")
    cf = np.cumsum(f)
    cg = np.cumsum(g)
    ch = np.cumsum(h)
    diff = np.abs(cf[grid - 1] - cg[grid - 1])
    theta = ch[grid - 1]
    skipped = theta <= 1.0
    res = np.full(grid.size, np.nan)
    ok = ~skipped
    res[ok] = diff[ok] / (
        np.sqrt(theta[ok]) * np.log(theta[ok]) ** (1.5 + eps)
    )
    return res, skipped


def gal_koksma_ensemble(
    m: MapSystem, schedule: TargetSchedule, M: int, seed: int, n_grid, eps: float = 0.1
):
    """Normalized residual matrix (M trajectories x grid) with f = hit
    indicators, g = h = mu(B_k); uses partial hit sums from the ensemble
    kernels directly."""
    grid = np.asarray(sorted(set(int(n) for n in n_grid)), dtype=np.int64)
    summ = mcstats.run_ensemble(m, schedule, int(grid.max()), M, seed, grid)
    theta = schedule.E[grid - 1]
    skipped = theta <= 1.0
    res = np.full((M, grid.size), np.nan)
    ok = ~skipped
    denom = np.sqrt(theta[ok]) * np.log(theta[ok]) ** (1.5 + eps)
    res[:, ok] = np.abs(summ.S[:, ok] - schedule.E[grid - 1][None, ok]) / denom[None, :]
    return res, skipped


# ---------------------------------------------------------------------------
# recurrence sets
# ---------------------------------------------------------------------------

def recurrence_set_measure(m: MapSystem, k: int, eps: float, mc_samples: int = 200000):
    """mu(E_k(eps)) = mu{x : circle-dist(T^k x, x) <= eps}.

    Exact branchwise solve for piecewise-linear maps; Monte Carlo otherwise.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if eps <= 0.0:
        raise ParameterError("eps must be positive")
    if eps >= 0.5:
        return 1.0  # circle diameter is 1/2
    if m.branches is None:
        pts = dynamics.sample_initial(m, 999, mc_samples)
        cnt = 0
        for x in pts:
            y = dynamics.iterate(m, float(x), k)
            d = abs(y - x)
            d = min(d, 1.0 - d)
            cnt += d <= eps
        return cnt / mc_samples
    L, H, S, C = compose_branches(m, k)
    # on each branch solve (S-1)x + C in [n-eps, n+eps] for integers n
    s1 = S - 1.0
    v0 = s1 * L + C
    v1 = s1 * H + C
    vlo = np.minimum(v0, v1)
    vhi = np.maximum(v0, v1)
    n0 = np.ceil(vlo - eps).astype(np.int64)
    n1 = np.floor(vhi + eps).astype(np.int64)
    counts = np.maximum(n1 - n0 + 1, 0)
    rep = np.repeat(np.arange(L.size), counts)
    offs = np.concatenate([[0], np.cumsum(counts)])[:-1]
    nn = (np.arange(rep.size) - np.repeat(offs, counts) + n0[rep]).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        xa = (nn - eps - C[rep]) / s1[rep]
        xb = (nn + eps - C[rep]) / s1[rep]
    ilo = np.minimum(xa, xb)
    ihi = np.maximum(xa, xb)
    lo = np.maximum(ilo, L[rep])
    hi = np.minimum(ihi, H[rep])
    sel = hi > lo
    # degenerate slope-1 branches (s1 = 0) satisfy the condition identically
    # when |C - n| <= eps; none of the shipped expanding maps produce them
    if m.density_kind == "lebesgue":
        # length = 2 eps / |S-1| minus whatever the branch clipping removes;
        # differencing the rounded endpoints instead loses ~1e-12 at k = 18
        full = 2.0 * eps / np.abs(s1[rep])
        cut = np.maximum(L[rep] - ilo, 0.0) + np.maximum(ihi - H[rep], 0.0)
        return float(np.sum(np.maximum(full - cut, 0.0)[sel]))
    return _measure_union(m, lo[sel], hi[sel])


# ---------------------------------------------------------------------------
# quasi-Hoelder seminorm
# ---------------------------------------------------------------------------

def quasi_holder_seminorm(values, alpha: float, eps0: float, edges=None):
    """(|f|_alpha, ||f||_alpha) for a piecewise-constant f on the circle.

    |f|_alpha = sup over the geometric grid {eps0 2^-m} of
    eps^-alpha * integral of osc(f, B_eps(x)) dx, closed-form per level;
    ||f||_alpha adds the (Lebesgue) L1 norm.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError("alpha must lie in (0, 1]")
    if eps0 <= 0.0 or eps0 > 0.5:
        raise ParameterError("eps0 must lie in (0, 1/2]")
    v = np.asarray(values, dtype=np.float64)
    N = v.size
    if edges is None:
        edges = np.linspace(0.0, 1.0, N + 1)
    edges = np.asarray(edges, dtype=np.float64)
    widths = np.diff(edges)
    l1 = float(np.sum(np.abs(v) * widths))
    if np.ptp(v) == 0.0:
        return 0.0, l1
    best = 0.0
    eps = eps0
    min_w = widths.min()
    for _ in range(50):
        I = _osc_integral(v, edges, eps)
        best = max(best, I / eps ** alpha)
        if eps < 0.25 * min_w:
            break
        eps *= 0.5
    return best, l1 + best


def _osc_integral(v, edges, eps):
    """integral over the circle of osc(f, (x-eps, x+eps)) dx, f piecewise
    constant with the given cell edges."""
    N = v.size
    inner = edges[:-1]  # cell start points (0 included; circle wraps at 1)
    ev = np.unique(
        np.concatenate([(inner - eps) % 1.0, (inner + eps) % 1.0, inner])
    )
    ev = np.concatenate([ev, [ev[0] + 1.0]])
    total = 0.0
    v3 = np.concatenate([v, v, v])
    for s in range(ev.size - 1):
        a, b = ev[s], ev[s + 1]
        x = 0.5 * (a + b)
        lo = (x - eps) % 1.0
        end = lo + 2.0 * eps
        i0 = np.searchsorted(edges, lo, side="right") - 1
        if 2.0 * eps >= 1.0:
            seg = v
        elif end <= 1.0:
            i1 = np.searchsorted(edges, end, side="left") - 1
            seg = v3[N + i0 : N + i1 + 1]
        else:
            i1 = np.searchsorted(edges, end - 1.0, side="left") - 1
            seg = v3[N + i0 : 2 * N + i1 + 1]
        total += (seg.max() - seg.min()) * (b - a)
    return total
