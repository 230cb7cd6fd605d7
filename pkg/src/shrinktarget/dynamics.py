"""Catalog of expanding maps with invariant measures and orbit services.

All 1-D maps live on the unit interval treated as a circle, so metric balls
wrap around 0/1.  The doubling map additionally has an exact symbolic orbit
oracle (``exact_bit_orbit``): a mu-random point is an i.i.d. fair-bit binary
expansion, and hits of T^j x in a dyadic arc are decided exactly on a 60-bit
window, with no floating-point orbit drift.
"""

from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

from . import rng
from .errors import (
    DomainError,
    InputExhaustedError,
    ParameterError,
    UnsupportedMapError,
)

SCALE_BITS = 60
SCALE = 1 << SCALE_BITS  # dyadic grid used by the exact doubling oracle


@dataclass(frozen=True)
class MapSystem:
    """An expanding map together with its invariant measure.

    branches holds (lo, hi, slope, intercept) rows for piecewise-linear maps
    (T x = slope*x + intercept on [lo, hi)); it is None for the gauss map and
    the 2-torus endomorphism.  cell_edges/cell_density describe the invariant
    density when it is piecewise constant; density_kind 'lebesgue' means
    constant 1, 'gauss' means 1/((1+x) ln 2).
    """

    kind: str
    name: str
    domain: str  # 'circle' or 'torus'
    min_expansion: float
    params: tuple = ()
    branches: tuple = None  # ((lo, hi, slope, intercept), ...)
    density_kind: str = "lebesgue"
    cell_edges: tuple = None
    cell_density: tuple = None

    # ---- density helpers -------------------------------------------------
    def density_bounds(self):
        """(lower, upper) bounds of the invariant density."""
        if self.density_kind == "lebesgue":
            return 1.0, 1.0
        if self.density_kind == "gauss":
            ln2 = math.log(2.0)
            return 1.0 / (2.0 * ln2), 1.0 / ln2
        d = np.asarray(self.cell_density)
        return float(d.min()), float(d.max())

    def _cdf_tables(self):
        edges = np.asarray(self.cell_edges, dtype=np.float64)
        dens = np.asarray(self.cell_density, dtype=np.float64)
        cdf = np.concatenate([[0.0], np.cumsum(np.diff(edges) * dens)])
        cdf[-1] = 1.0
        return edges, cdf


def _mk_branches(rows):
    return tuple(tuple(float(v) for v in r) for r in rows)


def doubling_map() -> MapSystem:
    return MapSystem(
        kind="doubling",
        name="doubling",
        domain="circle",
        min_expansion=2.0,
        branches=_mk_branches([(0.0, 0.5, 2.0, 0.0), (0.5, 1.0, 2.0, -1.0)]),
    )


def tent_map() -> MapSystem:
    return MapSystem(
        kind="tent",
        name="tent",
        domain="circle",
        min_expansion=2.0,
        branches=_mk_branches([(0.0, 0.5, 2.0, 0.0), (0.5, 1.0, -2.0, 2.0)]),
    )


def beta_map(beta: float) -> MapSystem:
    """x -> beta*x mod 1.  Lebesgue-invariant for integer beta, Parry
    (piecewise-constant, truncated series) density otherwise."""
    beta = float(beta)
    if beta <= 1.0:
        raise ParameterError("beta must be > 1")
    nfull = int(math.floor(beta))
    rows = [(k / beta, (k + 1) / beta, beta, -float(k)) for k in range(nfull)]
    if nfull < beta:
        rows.append((nfull / beta, 1.0, beta, -float(nfull)))
    if abs(beta - round(beta)) < 1e-12:
        return MapSystem(
            kind="beta",
            name=f"beta:{beta:g}",
            domain="circle",
            min_expansion=beta,
            params=(beta,),
            branches=_mk_branches(rows),
        )
    edges, dens = _parry_density(beta)
    return MapSystem(
        kind="beta",
        name=f"beta:{beta:g}",
        domain="circle",
        min_expansion=beta,
        params=(beta,),
        branches=_mk_branches(rows),
        density_kind="piecewise",
        cell_edges=tuple(edges),
        cell_density=tuple(dens),
    )


def _parry_density(beta):
    """Parry density rho(x) = (1/F) sum_{n>=0, x < T^n 1} beta^-n as a
    piecewise-constant table (series truncated below 1e-18)."""
    orbit = []
    t, w, n = 1.0, 1.0, 0
    while w > 1e-18 and n < 4000:
        orbit.append((t, w))
        t = beta * t - math.floor(beta * t)
        w /= beta
        n += 1
    pts = sorted({round(p, 15) for p, _ in orbit} | {0.0, 1.0})
    edges = np.array(pts)
    mids = 0.5 * (edges[:-1] + edges[1:])
    dens = np.zeros_like(mids)
    for p, w in orbit:
        dens += np.where(mids < p, w, 0.0)
    mass = float(np.sum(dens * np.diff(edges)))
    return edges, dens / mass


def gauss_map() -> MapSystem:
    # inf |T'| = 1 at x = 1; the stored rate is the two-iterate expansion
    # constant (|(T^2)'| >= phi^2), the usual uniform-expansion surrogate.
    return MapSystem(
        kind="gauss",
        name="gauss",
        domain="circle",
        min_expansion=(1.0 + math.sqrt(5.0)) / 2.0,
        density_kind="gauss",
    )


def markov_linear_map(branches=None, name="markov") -> MapSystem:
    """Piecewise-linear Markov map; branch images must be unions of cells.

    Default instance: [0,2/3) -> [0,1) with slope 3/2 and [2/3,1) -> [0,2/3)
    with slope 2, whose invariant density is 9/8 on [0,2/3) and 3/4 on
    [2/3,1) (exact).
    """
    if branches is None:
        branches = [(0.0, 2.0 / 3.0, 1.5, 0.0), (2.0 / 3.0, 1.0, 2.0, -4.0 / 3.0)]
    branches = _mk_branches(branches)
    edges = sorted({b[0] for b in branches} | {b[1] for b in branches})
    if edges[0] != 0.0 or edges[-1] != 1.0:
        raise ParameterError("branch intervals must cover [0,1)")
    _check_markov(branches, edges)
    dens = _markov_density(branches, edges)
    slopes = [abs(b[2]) for b in branches]
    if min(slopes) <= 1.0:
        raise ParameterError("all branch slopes must exceed 1 in modulus")
    return MapSystem(
        kind="markov-piecewise-linear",
        name=name,
        domain="circle",
        min_expansion=min(slopes),
        branches=branches,
        density_kind="piecewise",
        cell_edges=tuple(edges),
        cell_density=tuple(dens),
    )


def _check_markov(branches, edges, tol=1e-12):
    es = set()
    for e in edges:
        es.add(round(e, 12))
    for lo, hi, s, c in branches:
        img = sorted((s * lo + c, s * hi + c))
        for v in img:
            v = v - math.floor(v + tol) if v >= 1.0 - tol or v < -tol else v
            if abs(v - 1.0) < tol:
                v = 1.0
            if round(v, 12) not in es and not (abs(v) < tol or abs(v - 1.0) < tol):
                raise ParameterError(
                    f"branch image endpoint {v!r} is not a partition edge "
                    "(map is not Markov on its branch partition)"
                )


def _markov_density(branches, edges):
    """Invariant piecewise-constant density by solving the cell transfer
    matrix eigenproblem."""
    edges = np.asarray(edges)
    ncell = len(edges) - 1
    A = np.zeros((ncell, ncell))
    mids = 0.5 * (edges[:-1] + edges[1:])
    for lo, hi, s, c in branches:
        for j, y in enumerate(mids):
            # preimage of cell j midpoint under this branch, if any
            x = (y - c) / s
            if lo <= x < hi:
                i = np.searchsorted(edges, x, side="right") - 1
                A[j, i] += 1.0 / abs(s)
    w, v = np.linalg.eig(A)
    k = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[k] - 1.0) > 1e-9:
        raise ParameterError("no invariant density: leading eigenvalue != 1")
    rho = np.real(v[:, k])
    if rho.sum() < 0:
        rho = -rho
    if (rho < -1e-12).any():
        raise ParameterError("invariant density came out signed")
    rho = np.maximum(rho, 0.0)
    rho /= float(np.sum(rho * np.diff(edges)))
    return rho


def toral_map(kx: int = 2, ky: int = 2) -> MapSystem:
    kx, ky = int(kx), int(ky)
    if kx < 2 or ky < 2:
        raise ParameterError("expansion factors must be integers >= 2")
    return MapSystem(
        kind="toral-2d",
        name=f"toral:{kx},{ky}",
        domain="torus",
        min_expansion=float(min(kx, ky)),
        params=(kx, ky),
    )


_CONSTRUCTORS = {
    "doubling": doubling_map,
    "tent": tent_map,
    "gauss": gauss_map,
}


def make_map(spec: str) -> MapSystem:
    """Build a map from a short textual spec: 'doubling', 'tent', 'gauss',
    'beta:<b>', 'markov', 'toral:<kx>,<ky>'."""
    spec = spec.strip()
    if spec in _CONSTRUCTORS:
        return _CONSTRUCTORS[spec]()
    if spec == "markov":
        return markov_linear_map()
    if spec.startswith("beta:"):
        return beta_map(float(spec.split(":", 1)[1]))
    if spec.startswith("toral:"):
        parts = spec.split(":", 1)[1].split(",")
        if len(parts) != 2:
            raise ParameterError(f"bad toral spec {spec!r}")
        return toral_map(int(parts[0]), int(parts[1]))
    raise UnsupportedMapError(f"unknown map spec {spec!r}")


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------

def _apply_once(m: MapSystem, x: float) -> float:
    if m.kind == "gauss":
        if x == 0.0:
            return 0.0
        y = 1.0 / x
        return y - math.floor(y)
    for lo, hi, s, c in m.branches:
        if lo <= x < hi:
            y = s * x + c
            y -= math.floor(y)
            if y >= 1.0 or y < 0.0:
                y = 0.0
            return y
    # x == 1.0 is identified with 0 on the circle
    if x == 1.0:
        return _apply_once(m, 0.0)
    raise DomainError(f"{x!r} outside [0,1)")


def _apply_once_exact(m: MapSystem, x: Fraction) -> Fraction:
    for lo, hi, s, c in m.branches:
        if Fraction(lo) <= x < Fraction(hi):
            y = Fraction(s) * x + Fraction(c)
            return y - math.floor(y)
    raise DomainError(f"{x!r} outside [0,1)")


def iterate(m: MapSystem, x, n: int, exact: bool = False):
    """T^n(x).  n = 0 returns x.

    exact=True runs rational arithmetic (piecewise-linear maps whose branch
    parameters are exactly representable).  In float mode the doubling map is
    refused beyond 40 steps: binary floating point collapses 2x mod 1 to 0
    within ~53 iterations, so long doubling orbits must go through
    exact_bit_orbit instead.
    """
    if n < 0:
        raise ParameterError("n must be >= 0")
    if m.domain == "torus":
        kx, ky = m.params
        p = np.asarray(x, dtype=np.float64)
        if p.shape != (2,) or (p < 0).any() or (p >= 1).any():
            raise DomainError(f"{x!r} outside the unit torus")
        for _ in range(n):
            p = np.array([(kx * p[0]) % 1.0, (ky * p[1]) % 1.0])
        return p
    if exact:
        if m.branches is None:
            raise UnsupportedMapError("exact iteration needs piecewise-linear branches")
        z = Fraction(x)
        if not 0 <= z < 1:
            raise DomainError(f"{x!r} outside [0,1)")
        for _ in range(n):
            z = _apply_once_exact(m, z)
        return z
    xf = float(x)
    if not (0.0 <= xf <= 1.0):
        raise DomainError(f"{x!r} outside [0,1)")
    if m.kind == "doubling" and n > 40:
        raise ParameterError(
            "float iteration of the doubling map is refused beyond 40 steps "
            "(binary float orbits collapse); use exact_bit_orbit"
        )
    for _ in range(n):
        xf = _apply_once(m, xf)
    return xf


# ---------------------------------------------------------------------------
# invariant measure
# ---------------------------------------------------------------------------

def measure_of_interval(m: MapSystem, a: float, b: float) -> float:
    """mu([a,b)) for 0 <= a <= b <= 1 (no wrap)."""
    if b < a:
        raise ParameterError("need a <= b")
    a, b = max(a, 0.0), min(b, 1.0)
    if m.density_kind == "lebesgue":
        return b - a
    if m.density_kind == "gauss":
        return math.log2((1.0 + b) / (1.0 + a))
    edges, cdf = m._cdf_tables()
    ca, cb = np.interp([a, b], edges, cdf)
    return float(cb - ca)


def measure_of_arc(m: MapSystem, lo: float, length: float) -> float:
    """mu of the circular arc [lo, lo+length) mod 1."""
    if length >= 1.0:
        return 1.0
    lo = lo % 1.0
    hi = lo + length
    if hi <= 1.0:
        return measure_of_interval(m, lo, hi)
    return measure_of_interval(m, lo, 1.0) + measure_of_interval(m, 0.0, hi - 1.0)


def measure_of_ball(m: MapSystem, center, radius: float) -> float:
    """mu(B(center, radius)); closed form for every shipped density."""
    if radius < 0:
        raise ParameterError("radius must be >= 0")
    if m.domain == "torus":
        r = radius
        if r >= math.sqrt(0.5):
            return 1.0
        if r <= 0.5:
            return math.pi * r * r
        d = 0.5
        seg = r * r * math.acos(d / r) - d * math.sqrt(r * r - d * d)
        return math.pi * r * r - 4.0 * seg
    if radius >= 0.5:
        return 1.0
    c = float(center) % 1.0
    return measure_of_arc(m, c - radius, 2.0 * radius)


def preimage_intervals(m: MapSystem, a: float, b: float):
    """T^{-1}[a,b) as a list of (lo, hi) intervals (piecewise-linear maps)."""
    if m.branches is None:
        raise UnsupportedMapError("branchwise preimages need piecewise-linear branches")
    out = []
    for lo, hi, s, c in m.branches:
        ia, ib = sorted(((a - c) / s, (b - c) / s))
        x0, x1 = max(lo, ia), min(hi, ib)
        if x1 > x0:
            out.append((x0, x1))
    return out


def preimage_measure(m: MapSystem, a: float, b: float) -> float:
    """mu(T^{-1}[a,b)); exact branchwise for piecewise-linear maps, closed
    form (telescoping branch series) for the gauss map."""
    if m.kind == "gauss":
        # branch k preimage of [a,b) is (1/(k+b), 1/(k+a)]; the mu-measures
        # telescope to exactly mu([a,b)), so sum a prefix and close the tail.
        K = 64
        tot = 0.0
        for k in range(1, K + 1):
            tot += math.log2((1.0 + 1.0 / (k + a)) / (1.0 + 1.0 / (k + b)))
        tot += math.log2((K + 1 + b) / (K + 1 + a))
        return tot
    return sum(measure_of_interval(m, lo, hi) for lo, hi in preimage_intervals(m, a, b))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _inverse_cdf(m: MapSystem, u: np.ndarray) -> np.ndarray:
    if m.density_kind == "lebesgue":
        return u
    if m.density_kind == "gauss":
        return np.exp2(u) - 1.0
    edges, cdf = m._cdf_tables()
    return np.interp(u, cdf, edges)


def sample_initial(m: MapSystem, seed: int, M: int):
    """M independent mu-distributed starts, deterministic in seed.

    Point t uses word 0 (and word 1 on the torus) of counter-based stream t,
    the same convention the ensemble kernels use.
    """
    if M < 0:
        raise ParameterError("M must be >= 0")
    t = np.arange(M, dtype=np.uint64)
    keys = rng.stream_key(seed, t)
    with np.errstate(over="ignore"):
        u0 = (rng.mix64(keys + rng.GOLDEN) >> np.uint64(11)).astype(
            np.float64
        ) * 2.0 ** -53
        if m.domain == "torus":
            u1 = (rng.mix64(keys + np.uint64(2) * rng.GOLDEN) >> np.uint64(11)).astype(
                np.float64
            ) * 2.0 ** -53
            return np.column_stack([u0, u1])
    return _inverse_cdf(m, u0)


# ---------------------------------------------------------------------------
# exact symbolic orbit for the doubling map
# ---------------------------------------------------------------------------

def _pack_bits(bits: np.ndarray) -> np.ndarray:
    """0/1 array -> uint64 words, MSB-first, zero padded."""
    bits = np.asarray(bits, dtype=np.uint64)
    pad = (-len(bits)) % 64
    if pad:
        bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint64)])
    shifts = np.uint64(63) - np.arange(64, dtype=np.uint64)
    return (bits.reshape(-1, 64) << shifts[None, :]).sum(axis=1, dtype=np.uint64)


def _windows(wrds: np.ndarray, j: np.ndarray, width: int = SCALE_BITS) -> np.ndarray:
    """width-bit windows starting at bit offsets j of the packed stream."""
    wi = j >> 6
    sh = (j & 63).astype(np.uint64)
    w0 = wrds[wi]
    w1 = wrds[wi + 1]
    hi = np.where(sh == 0, w0, (w0 << sh) | (w1 >> (np.uint64(64) - np.maximum(sh, 1))))
    return hi >> np.uint64(64 - width)


def exact_bit_orbit(bits, schedule, n: int) -> np.ndarray:
    """Hit indicators of T^j x in B_j, j = 1..n, decided exactly.

    x = 0.b1 b2 ... is given by its fair-bit expansion; T^j x shifts the
    stream.  Each test first looks at a guard window of
    ceil(log2(1/r_j)) + 2 bits; when the window cell straddles an arc
    endpoint the window widens (in steps of 4 bits, up to the 60-bit arc
    grid, where the test is always conclusive).
    """
    if getattr(schedule, "scaled_lo", None) is None:
        raise UnsupportedMapError("exact_bit_orbit requires a doubling-map schedule")
    if n > schedule.n_max:
        raise ParameterError("n exceeds the schedule horizon")
    bits = np.asarray(bits)
    nbits = len(bits)
    r_n = schedule.r[n - 1]
    need = n + int(math.ceil(math.log2(1.0 / max(r_n, 2.0 ** -58)))) + 2
    if nbits < need:
        raise InputExhaustedError(f"need at least {need} bits, got {nbits}")
    wrds = _pack_bits(bits)
    wrds = np.concatenate([wrds, np.zeros(2, dtype=np.uint64)])  # slack for windows

    j = np.arange(1, n + 1)
    lo = schedule.scaled_lo[:n]
    width = schedule.scaled_width[:n]
    out = np.zeros(n, dtype=np.uint8)
    out[width == np.uint64(SCALE)] = 1  # full-measure balls always hit

    rr = np.maximum(schedule.r[:n], 2.0 ** -58)
    W = np.minimum(np.ceil(np.log2(1.0 / rr)).astype(np.int64) + 2, SCALE_BITS)
    W = np.maximum(W, 1)
    undecided = width != np.uint64(SCALE)
    while True:
        idx = np.nonzero(undecided)[0]
        if idx.size == 0:
            break
        over = idx + 1 + W[idx] > nbits
        if over.any():
            raise InputExhaustedError(
                "guard-window widening needs more bits than the stream supplies"
            )
        v = _windows(wrds, idx + 1, SCALE_BITS)
        # cell of T^j x at resolution W: [vW, vW+1) * 2^(60-W) on the 60-bit grid
        shift = (np.uint64(SCALE_BITS) - W[idx].astype(np.uint64))
        cell_lo = (v >> shift) << shift
        cell_len = np.uint64(1) << shift
        u = (cell_lo - lo[idx]) & np.uint64(SCALE - 1)
        fully_in = u + cell_len <= width[idx]
        fully_out = (u >= width[idx]) & (u + cell_len <= np.uint64(SCALE))
        out[idx[fully_in]] = 1
        out[idx[fully_out]] = 0
        undecided[idx[fully_in | fully_out]] = False
        still = undecided[idx].any()
        if not still:
            break
        if (W[idx] >= SCALE_BITS).all() and still:
            # cannot happen: at full width the cell length is 1 and the test
            # above is a complete dichotomy on the 60-bit grid
            raise AssertionError("inconclusive at full window width")
        W = np.where(undecided, np.minimum(W + 4, SCALE_BITS), W)
    return out
