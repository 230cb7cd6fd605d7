"""Numba implementations of the hot kernels.

Signatures mirror _kernels_numpy exactly; the two backends must agree (to
floating-point roundoff in the covariance sums, bit-for-bit in the orbit
counters).  All prange loops write per-index slots only, so results do not
depend on the thread count.
"""

import numpy as np
from numba import njit, prange

U64 = np.uint64
GOLDEN = U64(0x9E3779B97F4A7C15)
MIX1 = U64(0xBF58476D1CE4E5B9)
MIX2 = U64(0x94D049BB133111EB)
MASK60 = U64((1 << 60) - 1)


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> U64(30))) * MIX1
    z = (z ^ (z >> U64(27))) * MIX2
    return z ^ (z >> U64(31))


@njit(cache=True, parallel=True)
def bit_orbit_hits(seed, M, n, lo, width, cps):
    """Exact doubling-orbit hit counts at checkpoints.

    Trajectory t is the fair-bit stream of counter-based stream t; the hit
    test compares the 60-bit window of T^j x against the dyadic arc
    [lo[j-1], lo[j-1]+width[j-1]) on the 2^60 grid.
    """
    ncp = cps.size
    S = np.zeros((M, ncp), dtype=np.int64)
    for t in prange(M):
        key = _mix64(_mix64(U64(seed)) + (U64(t) + U64(1)) * GOLDEN)
        w0 = _mix64(key + U64(1) * GOLDEN)
        w1 = _mix64(key + U64(2) * GOLDEN)
        nextk = U64(3)
        sh = 1  # bit offset of the window within w0 (stream position j)
        cnt = 0
        ci = 0
        for j in range(1, n + 1):
            if sh == 64:
                w0 = w1
                w1 = _mix64(key + nextk * GOLDEN)
                nextk += U64(1)
                sh = 0
            if sh == 0:
                buf = w0
            else:
                buf = (w0 << U64(sh)) | (w1 >> U64(64 - sh))
            v = buf >> U64(4)
            u = (v - lo[j - 1]) & MASK60
            if u < width[j - 1]:
                cnt += 1
            if ci < ncp and j == cps[ci]:
                S[t, ci] = cnt
                ci += 1
            sh += 1
    return S


@njit(cache=True, parallel=True)
def float_orbit_hits(starts, blo, bhi, bslope, bicpt, is_gauss, p, r, n, cps):
    """Float-orbit hit counts at checkpoints for non-doubling 1-D maps."""
    M = starts.size
    ncp = cps.size
    S = np.zeros((M, ncp), dtype=np.int64)
    nb = blo.size
    for t in prange(M):
        x = starts[t]
        cnt = 0
        ci = 0
        for j in range(1, n + 1):
            if is_gauss:
                if x > 0.0:
                    y = 1.0 / x
                    x = y - np.floor(y)
                    if x >= 1.0 or x < 0.0:
                        x = 0.0
            else:
                for b in range(nb):
                    if blo[b] <= x < bhi[b]:
                        x = bslope[b] * x + bicpt[b]
                        x -= np.floor(x)
                        if x >= 1.0 or x < 0.0:
                            x = 0.0
                        break
            d = abs(x - p)
            if d > 0.5:
                d = 1.0 - d
            if d < r[j - 1]:
                cnt += 1
            if ci < ncp and j == cps[ci]:
                S[t, ci] = cnt
                ci += 1
    return S


@njit(cache=True)
def _arc_olap(s, b, beta):
    """Lebesgue measure of [0,s) intersected with the arc [b, b+beta) mod 1."""
    out = min(s, min(b + beta, 1.0)) - b
    if out < 0.0:
        out = 0.0
    w = b + beta - 1.0
    if w > 0.0:
        t = min(s, w)
        if t > 0.0:
            out += t
    return out


@njit(cache=True)
def _G(t, b, beta, pm):
    """Lebesgue measure of [0,t) intersected with T^{-m}[b,b+beta), pm=2^m."""
    z = t * pm
    fl = np.floor(z)
    return fl * beta / pm + _arc_olap(z - fl, b, beta) / pm


@njit(cache=True)
def pre_olap(a, alpha, b, beta, pm):
    """Lebesgue measure of [a,a+alpha) intersected with T^{-m}[b,b+beta)."""
    hi = a + alpha
    if hi <= 1.0:
        return _G(hi, b, beta, pm) - _G(a, b, beta, pm)
    return (beta - _G(a, b, beta, pm)) + _G(hi - 1.0, b, beta, pm)


@njit(cache=True, parallel=True)
def cross_sums(a, alpha, L):
    """c[j] = sum_{m=1..min(j,L)} Cov(1_{A_{j-m}}, 1_{A_j} o T^m), 0-based j.

    Doubling map, Lebesgue measure; arcs A_i = [a[i], a[i]+alpha[i]).
    """
    n = a.size
    c = np.zeros(n)
    for j in prange(n):
        s = 0.0
        mm = min(j, L)
        for m in range(1, mm + 1):
            i = j - m
            pm = 2.0 ** m
            s += pre_olap(a[i], alpha[i], a[j], alpha[j], pm) - alpha[i] * alpha[j]
        c[j] = s
    return c


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    cps = np.array([1], dtype=np.int64)
    bit_orbit_hits(1, 1, 1, np.zeros(1, np.uint64), np.ones(1, np.uint64), cps)
    float_orbit_hits(
        np.array([0.3]),
        np.array([0.0, 0.5]),
        np.array([0.5, 1.0]),
        np.array([2.0, 2.0]),
        np.array([0.0, -1.0]),
        False,
        0.3,
        np.array([0.5]),
        1,
        cps,
    )
    cross_sums(np.array([0.1, 0.2]), np.array([0.05, 0.04]), 60)
