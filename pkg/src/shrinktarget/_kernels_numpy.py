"""Pure-numpy twins of the numba kernels.

Same signatures and same results as _kernels_numba (bit-for-bit for the
orbit counters, to roundoff for the covariance sums).  Useful where numba is
unavailable; expect an order of magnitude less throughput on the orbit
kernels.
"""

import numpy as np

from . import rng

U64 = np.uint64
MASK60 = U64((1 << 60) - 1)

_TRAJ_CHUNK = 512
_STEP_CHUNK = 8192


def bit_orbit_hits(seed, M, n, lo, width, cps):
    """Exact doubling-orbit hit counts at checkpoints (vectorized)."""
    cps = np.asarray(cps, dtype=np.int64)
    ncp = cps.size
    S = np.zeros((M, ncp), dtype=np.int64)
    nwords = (n + 60 + 63) // 64 + 2
    for t0 in range(0, M, _TRAJ_CHUNK):
        mt = min(_TRAJ_CHUNK, M - t0)
        keys = rng.stream_key(seed, np.arange(t0, t0 + mt, dtype=np.uint64))
        k = np.arange(nwords, dtype=np.uint64)
        with np.errstate(over="ignore"):
            W = rng.mix64(keys[:, None] + (k[None, :] + U64(1)) * rng.GOLDEN)
        cnt = np.zeros(mt, dtype=np.int64)
        ci = 0
        for j0 in range(1, n + 1, _STEP_CHUNK):
            j1 = min(j0 + _STEP_CHUNK, n + 1)
            j = np.arange(j0, j1)
            wi = j >> 6
            sh = (j & 63).astype(np.uint64)
            w0 = W[:, wi]
            w1 = W[:, wi + 1]
            safe = np.maximum(sh, U64(1))
            buf = np.where(
                sh == 0, w0, (w0 << sh) | (w1 >> (U64(64) - safe))
            )
            v = buf >> U64(4)
            u = (v - lo[j0 - 1 : j1 - 1][None, :]) & MASK60
            hits = u < width[j0 - 1 : j1 - 1][None, :]
            csum = np.cumsum(hits, axis=1)
            while ci < ncp and cps[ci] < j1:
                S[t0 : t0 + mt, ci] = cnt + csum[:, cps[ci] - j0]
                ci += 1
            cnt += csum[:, -1]
    return S


def float_orbit_hits(starts, blo, bhi, bslope, bicpt, is_gauss, p, r, n, cps):
    """Float-orbit hit counts at checkpoints for non-doubling 1-D maps."""
    cps = np.asarray(cps, dtype=np.int64)
    ncp = cps.size
    M = starts.size
    S = np.zeros((M, ncp), dtype=np.int64)
    x = starts.copy()
    cnt = np.zeros(M, dtype=np.int64)
    ci = 0
    for j in range(1, n + 1):
        if is_gauss:
            pos = x > 0.0
            y = np.where(pos, 1.0 / np.where(pos, x, 1.0), 0.0)
            x = np.where(pos, y - np.floor(y), 0.0)
        else:
            xn = np.empty_like(x)
            done = np.zeros(x.shape, dtype=bool)
            for b in range(blo.size):
                sel = (~done) & (blo[b] <= x) & (x < bhi[b])
                if sel.any():
                    xn[sel] = bslope[b] * x[sel] + bicpt[b]
                    done |= sel
            xn[~done] = 0.0
            x = xn - np.floor(xn)
        x = np.where((x >= 1.0) | (x < 0.0), 0.0, x)
        d = np.abs(x - p)
        d = np.where(d > 0.5, 1.0 - d, d)
        cnt += d < r[j - 1]
        if ci < ncp and j == cps[ci]:
            S[:, ci] = cnt
            ci += 1
    return S


def _arc_olap(s, b, beta):
    """lambda([0,s) intersect arc [b,b+beta) mod 1), elementwise."""
    out = np.clip(np.minimum(s, np.minimum(b + beta, 1.0)) - b, 0.0, None)
    out = out + np.clip(np.minimum(s, np.maximum(b + beta - 1.0, 0.0)), 0.0, None)
    return out


def _G(t, b, beta, pm):
    z = t * pm
    fl = np.floor(z)
    return fl * beta / pm + _arc_olap(z - fl, b, beta) / pm


def pre_olap(a, alpha, b, beta, pm):
    """lambda([a,a+alpha) intersect T^{-m}[b,b+beta)), elementwise, pm=2^m."""
    a = np.asarray(a, dtype=np.float64)
    hi = a + alpha
    wrapped = hi > 1.0
    base = _G(np.minimum(hi, 1.0), b, beta, pm) - _G(a, b, beta, pm)
    extra = np.where(wrapped, _G(np.maximum(hi - 1.0, 0.0), b, beta, pm), 0.0)
    return base + extra


def cross_sums(a, alpha, L):
    """c[j] = sum_{m=1..min(j,L)} Cov(1_{A_{j-m}}, 1_{A_j} o T^m)."""
    n = a.size
    c = np.zeros(n)
    for m in range(1, min(L, n - 1) + 1):
        i = np.arange(0, n - m)
        j = i + m
        pm = 2.0 ** m
        c[j] += pre_olap(a[i], alpha[i], a[j], alpha[j], pm) - alpha[i] * alpha[j]
    return c


def warmup():
    """Parity with the numba backend; nothing to compile."""
