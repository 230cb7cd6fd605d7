"""Shrinking-target schedules: nested balls B_i with mu(B_i) = min(1, C/i^g).

For the doubling map every ball is committed to a dyadic arc on the 2^60
grid (scaled_lo / scaled_width, uint64).  The stored measures mu_i are the
exact measures of those dyadic arcs, so the exact orbit oracle, the
covariance engine and the Monte Carlo ensemble all see literally the same
targets.  The rounding to the grid perturbs each mu_i by at most 2^-59,
far inside the 1e-10 schedule tolerance.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import dynamics
from .dynamics import MapSystem, SCALE, SCALE_BITS
from .errors import DomainError, ParameterError, UnsupportedMapError

# Default generic (aperiodic) center used when a config says
# "generic-default".  See the decisions ledger for why this particular
# irrational is shipped as the default.
GENERIC_CENTER = math.pi - 3.0


@dataclass(frozen=True)
class TargetSchedule:
    map: MapSystem
    p: float  # center (1-D maps) or tuple for the torus
    gamma: float
    C: float
    n_max: int
    kind: str  # 'ball' or 'dyadic'
    r: np.ndarray  # radii (half arc length for dyadic cylinders)
    mu: np.ndarray  # target measures
    E: np.ndarray  # prefix sums of mu (extended-precision accumulation)
    scaled_lo: np.ndarray = None  # uint64, doubling only
    scaled_width: np.ndarray = None  # uint64, doubling only
    depth: np.ndarray = None  # int64, dyadic schedules only

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=np.float64))
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64))
        object.__setattr__(self, "E", np.asarray(self.E, dtype=np.float64))

    @property
    def name(self):
        return f"{self.kind}(p={self.p!r},gamma={self.gamma:g},C={self.C:g})"


def _prefix_sums(mu):
    # extended-precision prefix sums (80-bit accumulator on x86)
    return np.cumsum(mu.astype(np.longdouble)).astype(np.float64)


def _arc_measure_vec(m: MapSystem, lo, length):
    """mu of arcs [lo, lo+length) mod 1, vectorized."""
    lo = np.asarray(lo) % 1.0
    length = np.minimum(np.asarray(length), 1.0)
    hi = lo + length
    if m.density_kind == "lebesgue":
        return length
    if m.density_kind == "gauss":
        main = np.log2((1.0 + np.minimum(hi, 1.0)) / (1.0 + lo))
        wrap = np.where(hi > 1.0, np.log2(np.maximum(hi, 1.0)), 0.0)
        return main + wrap
    edges, cdf = m._cdf_tables()
    main = np.interp(np.minimum(hi, 1.0), edges, cdf) - np.interp(lo, edges, cdf)
    wrap = np.where(hi > 1.0, np.interp(np.maximum(hi - 1.0, 0.0), edges, cdf), 0.0)
    return main + wrap


def _ball_measure_vec(m: MapSystem, p, rr):
    if m.domain == "torus":
        rr = np.asarray(rr)
        out = np.where(rr <= 0.5, np.pi * rr * rr, 0.0)
        mid = (rr > 0.5) & (rr < math.sqrt(0.5))
        if mid.any():
            r2 = rr[mid]
            seg = r2 * r2 * np.arccos(0.5 / r2) - 0.5 * np.sqrt(r2 * r2 - 0.25)
            out[mid] = np.pi * r2 * r2 - 4.0 * seg
        return np.where(rr >= math.sqrt(0.5), 1.0, out)
    return _arc_measure_vec(m, (p - np.asarray(rr)) % 1.0, 2.0 * np.asarray(rr))


def _invert_radii(m: MapSystem, p, mu):
    """Vectorized bisection of measure_of_ball(p, r) = mu (residual < 1e-12)."""
    if m.domain != "torus" and m.density_kind == "lebesgue":
        return np.where(mu >= 1.0, 0.5, mu / 2.0)
    rmax = math.sqrt(0.5) if m.domain == "torus" else 0.5
    lo = np.zeros_like(mu)
    hi = np.full_like(mu, rmax)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        val = _ball_measure_vec(m, p, mid)
        take = val < mu
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    return np.where(mu >= 1.0, rmax, 0.5 * (lo + hi))


def _scale_arcs(p, r, mu):
    """Commit balls to nested dyadic arcs on the 2^60 grid (doubling map)."""
    c = int(round((p % 1.0) * SCALE)) % SCALE
    # left/right radii in grid units, clamped to at most a full circle
    d = np.minimum(np.round(r * SCALE), SCALE // 2).astype(np.int64)
    full = mu >= 1.0
    d = np.where(full, SCALE // 2, d)
    # nesting: radii must be nonincreasing
    d = np.minimum.accumulate(d)
    lo = (c - d) % SCALE
    width = np.minimum(2 * d, SCALE)
    return lo.astype(np.uint64), width.astype(np.uint64)


def build_schedule(
    m: MapSystem, p, gamma: float, C: float, n_max: int
) -> TargetSchedule:
    """Nested balls with mu(B_i) = min(1, C/i^gamma)."""
    if not (0.0 < gamma <= 1.0):
        raise ParameterError("gamma must lie in (0, 1]")
    if C <= 0.0:
        raise ParameterError("C must be positive")
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    if m.domain == "torus":
        pt = np.asarray(p, dtype=np.float64)
        if pt.shape != (2,) or (pt < 0).any() or (pt >= 1).any():
            raise DomainError(f"center {p!r} outside the unit torus")
        p = (float(pt[0]), float(pt[1]))
    else:
        p = float(p)
        if not (0.0 <= p < 1.0):
            raise DomainError(f"center {p!r} outside [0,1)")
    i = np.arange(1, n_max + 1, dtype=np.float64)
    mu = np.minimum(1.0, C / i ** gamma)
    r = _invert_radii(m, p, mu)
    r = np.minimum.accumulate(r)  # nesting
    scaled_lo = scaled_width = None
    if m.kind == "doubling":
        scaled_lo, scaled_width = _scale_arcs(p, r, mu)
        mu = scaled_width.astype(np.float64) * 2.0 ** -SCALE_BITS
        r = scaled_width.astype(np.float64) * 2.0 ** -(SCALE_BITS + 1)
    else:
        mu = np.asarray(_ball_measure_vec(m, p, r), dtype=np.float64)
        mu[r >= (math.sqrt(0.5) if m.domain == "torus" else 0.5)] = 1.0
    return TargetSchedule(
        map=m,
        p=p,
        gamma=gamma,
        C=C,
        n_max=int(n_max),
        kind="ball",
        r=r,
        mu=mu,
        E=_prefix_sums(mu),
        scaled_lo=scaled_lo,
        scaled_width=scaled_width,
    )


def dyadic_schedule(p, n_max: int, m: MapSystem = None) -> TargetSchedule:
    """Cylinder targets: B_i is the depth-ceil(log2 i) dyadic cylinder at p.

    Exact powers of two throughout; this is what the exact-Markov operator
    model consumes.  Only the doubling map carries dyadic cylinders with
    Lebesgue cylinder measures, so other maps are refused.
    """
    if m is None:
        m = dynamics.doubling_map()
    if m.kind != "doubling":
        raise UnsupportedMapError("dyadic cylinder schedules require the doubling map")
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    p = float(p) % 1.0
    i = np.arange(1, n_max + 1)
    depth = np.ceil(np.log2(i)).astype(np.int64)
    if depth.max() >= SCALE_BITS:
        raise ParameterError("schedule depth exceeds the 60-bit arc grid")
    mu = np.exp2(-depth.astype(np.float64))
    cyl = (int(round(p * SCALE)) % SCALE) >> (SCALE_BITS - depth)
    scaled_lo = (cyl << (SCALE_BITS - depth)).astype(np.uint64)
    scaled_width = (np.int64(1) << (SCALE_BITS - depth)).astype(np.uint64)
    return TargetSchedule(
        map=m,
        p=p,
        gamma=1.0,
        C=1.0,
        n_max=int(n_max),
        kind="dyadic",
        r=mu / 2.0,
        mu=mu,
        E=_prefix_sums(mu),
        scaled_lo=scaled_lo,
        scaled_width=scaled_width,
        depth=depth,
    )


def membership(schedule: TargetSchedule, i: int, x) -> bool:
    """1_{B_i}(x), half-open convention (boundary counts as outside)."""
    if not 1 <= i <= schedule.n_max:
        raise IndexError(f"index {i} outside 1..{schedule.n_max}")
    if schedule.map.domain == "torus":
        pt = np.asarray(x, dtype=np.float64)
        dx = np.abs(pt - np.asarray(schedule.p))
        dx = np.minimum(dx, 1.0 - dx)
        return bool(math.hypot(dx[0], dx[1]) < schedule.r[i - 1])
    x = float(x) % 1.0
    if schedule.scaled_lo is not None:
        v = int(x * SCALE) % SCALE
        u = (v - int(schedule.scaled_lo[i - 1])) % SCALE
        return bool(u < int(schedule.scaled_width[i - 1]))
    d = abs(x - schedule.p)
    d = min(d, 1.0 - d)
    return d < schedule.r[i - 1]
