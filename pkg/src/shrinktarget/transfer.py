"""Finite transfer-operator models and the martingale decomposition.

Functions are vectors of per-cell values; L acts as the transfer operator P
with respect to the invariant measure mu (row-stochastic: P1 = 1).  Two
kinds of model exist:

* ulam:        conditional transition measures between N uniform cells,
               assembled exactly branch-by-branch for piecewise-linear maps
               (closed form for the gauss map).
* exact-markov: the doubling map on depth-d dyadic cells, where L, the
               Koopman operator and cylinder observables are all exact and
               the decomposition identities hold to machine precision.

The w recurrence w_{k+1} = L(phi_k + w_k), w_1 = 0, is the O(n) form of the
partial sums w_n = P phi_{n-1} + P^2 phi_{n-2} + ...; psi_k is assembled
with the Koopman operator so that L psi_k vanishes on exact models.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import correlations, dynamics, targets
from .dynamics import MapSystem
from .errors import (
    ConvergenceError,
    ParameterError,
    ResourceLimitError,
    UnsupportedMapError,
)
from .targets import TargetSchedule

_DENSE_LIMIT = 8192


@dataclass
class TransferModel:
    N: int
    kind: str  # 'ulam' | 'exact-markov'
    weights: np.ndarray  # mu-measure per cell, sums to 1
    edges: np.ndarray  # cell boundaries, length N+1
    map: MapSystem = None
    depth: int = 0  # exact-markov only
    _matrix: object = field(default=None, repr=False)  # sparse L, lazy for exact kind

    # ---- operator actions ------------------------------------------------
    def apply(self, f):
        """L f (transfer operator)."""
        if self.kind == "exact-markov":
            half = self.N // 2
            g = 0.5 * (f[:half] + f[half:])
            return np.repeat(g, 2)
        return self._matrix @ f

    def koopman(self, f):
        """U f = f o T (mu-weighted adjoint of L)."""
        if self.kind == "exact-markov":
            h = 0.5 * (f[0::2] + f[1::2])
            return np.tile(h, 2)
        return (self._matrix.T @ (self.weights * f)) / self.weights

    @property
    def is_exact(self):
        return self.kind == "exact-markov"

    @property
    def matrix(self):
        """Dense L (small models only)."""
        if self.N > _DENSE_LIMIT:
            raise ResourceLimitError(f"dense matrix refused for N={self.N}")
        if self.kind == "exact-markov":
            M = np.zeros((self.N, self.N))
            half = self.N // 2
            for j in range(self.N):
                M[j, j >> 1] += 0.5
                M[j, (j >> 1) + half] += 0.5
            return M
        return self._matrix.toarray()

    def integrate(self, f):
        """integral of f d mu."""
        return float(np.dot(self.weights, f))

    def norm_l1(self, f):
        return float(np.dot(self.weights, np.abs(f)))


# ---------------------------------------------------------------------------
# model constructors
# ---------------------------------------------------------------------------

def _cell_measures(m: MapSystem, edges):
    return np.asarray(
        targets._arc_measure_vec(m, edges[:-1], np.diff(edges)), dtype=np.float64
    )


def _assemble_pw(m: MapSystem, edges):
    """Exact branchwise mass matrix w[j,i] = mu(cell_i cap T^{-1} cell_j)."""
    edges = np.asarray(edges, dtype=np.float64)
    rows, cols, data = [], [], []
    for lo, hi, s, c in m.branches:
        y0, y1 = sorted((s * lo + c, s * hi + c))
        y0, y1 = max(y0, 0.0), min(y1, 1.0)
        inner = edges[(edges > lo + 1e-15) & (edges < hi - 1e-15)]
        te = edges[(edges > y0 + 1e-15) & (edges < y1 - 1e-15)]
        pre = (te - c) / s
        pts = np.unique(np.concatenate([[lo, hi], inner, pre]))
        mids = 0.5 * (pts[:-1] + pts[1:])
        ii = np.clip(np.searchsorted(edges, mids, side="right") - 1, 0, len(edges) - 2)
        ys = s * mids + c
        ys -= np.floor(ys)
        jj = np.clip(np.searchsorted(edges, ys, side="right") - 1, 0, len(edges) - 2)
        wt = targets._arc_measure_vec(m, pts[:-1], np.diff(pts))
        rows.append(jj)
        cols.append(ii)
        data.append(np.asarray(wt, dtype=np.float64))
    n = len(edges) - 1
    return sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()


def _assemble_gauss(m: MapSystem, edges):
    N = len(edges) - 1
    K = max(2 * N, 64)
    rows, cols, data = [], [], []
    for j in range(N):
        a, b = edges[j], edges[j + 1]
        for k in range(1, K + 1):
            x0, x1 = 1.0 / (k + b), 1.0 / (k + a)
            i0 = int(np.searchsorted(edges, x0, side="right")) - 1
            i1 = int(np.searchsorted(edges, x1 - 1e-18, side="right")) - 1
            for i in range(max(i0, 0), min(i1, N - 1) + 1):
                u0, u1 = max(x0, edges[i]), min(x1, edges[i + 1])
                if u1 > u0:
                    rows.append(j)
                    cols.append(i)
                    data.append(math.log2((1.0 + u1) / (1.0 + u0)))
        # branches beyond K land entirely in the first cell
        rows.append(j)
        cols.append(0)
        data.append(math.log2((K + 1 + b) / (K + 1 + a)))
    return sp.coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()


def ulam_matrix(m: MapSystem, N: int) -> TransferModel:
    """Ulam model on N uniform cells; entries mu(cell_i cap T^{-1}cell_j)
    normalized by mu(cell_j), exact for piecewise-linear maps."""
    if N < 2:
        raise ParameterError("need at least 2 cells")
    if m.domain == "torus":
        raise UnsupportedMapError("ulam models are 1-D only")
    if m.kind == "gauss" and N > 1024:
        raise ResourceLimitError("gauss ulam capped at N=1024 (dense-ish rows)")
    edges = np.linspace(0.0, 1.0, N + 1)
    mass = _assemble_gauss(m, edges) if m.kind == "gauss" else _assemble_pw(m, edges)
    w = _cell_measures(m, edges)
    L = sp.diags(1.0 / w) @ mass
    # row sums are 1 up to assembly roundoff; renormalize so P1 = 1 holds
    rs = np.asarray(L.sum(axis=1)).ravel()
    L = sp.diags(1.0 / rs) @ L
    return TransferModel(N=N, kind="ulam", weights=w, edges=edges, map=m, _matrix=L.tocsr())


def markov_exact_model(m: MapSystem, depth: int) -> TransferModel:
    """Exact operator on the depth-d Markov refinement.

    Doubling map: 2^depth dyadic cells with the structured (matrix-free)
    dyadic operator.  The piecewise-linear Markov map is supported at
    depth 1, where the branch partition itself carries an exact matrix.
    """
    if depth < 1:
        raise ParameterError("depth must be >= 1")
    if m.kind == "doubling":
        N = 1 << depth
        if N > (1 << 26):
            raise ResourceLimitError("exact model too large")
        edges = np.linspace(0.0, 1.0, N + 1)
        return TransferModel(
            N=N,
            kind="exact-markov",
            weights=np.full(N, 1.0 / N),
            edges=edges,
            map=m,
            depth=depth,
        )
    if m.kind == "markov-piecewise-linear" and depth == 1:
        edges = np.asarray(m.cell_edges, dtype=np.float64)
        mass = _assemble_pw(m, edges)
        w = _cell_measures(m, edges)
        L = (sp.diags(1.0 / w) @ mass).tocsr()
        model = TransferModel(
            N=len(edges) - 1, kind="ulam", weights=w, edges=edges, map=m, _matrix=L
        )
        return model
    raise UnsupportedMapError(
        "exact Markov models: doubling at any depth, markov-piecewise-linear at depth 1"
    )


def dump_matrix(model: TransferModel, path):
    """Textual sparse triplet dump: header 'N kind', then row col value."""
    with open(path, "w") as fh:
        fh.write(f"{model.N} {model.kind}\n")
        M = sp.coo_matrix(
            model.matrix if model.kind == "exact-markov" else model._matrix
        )
        order = np.lexsort((M.col, M.row))
        for r, c, v in zip(M.row[order], M.col[order], M.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


# ---------------------------------------------------------------------------
# spectral gap
# ---------------------------------------------------------------------------

def _subdominant_modulus(model: TransferModel, tol=1e-8):
    """Modulus of the second-largest eigenvalue on the mean-zero subspace."""
    N = model.N
    w = model.weights

    def deflate(v):
        return v - np.dot(w, v)

    if N <= 2048:
        lam = np.linalg.eigvals(model.matrix)
        mods = np.sort(np.abs(lam))[::-1]
        return float(mods[1]) if len(mods) > 1 else 0.0

    def mv(v):
        return deflate(model.apply(deflate(v)))

    op = spla.LinearOperator((N, N), matvec=mv, dtype=np.float64)
    v0 = np.cos(2.0 * np.pi * (np.arange(N) + 0.3) / N)  # deterministic start
    try:
        vals = spla.eigs(
            op, k=6, which="LM", v0=v0, ncv=min(N, 64), maxiter=100000,
            tol=min(tol, 1e-10), return_eigenvectors=False,
        )
        return float(np.max(np.abs(vals)))
    except spla.ArpackNoConvergence as exc:
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            raise ConvergenceError(
                "spectral estimate did not converge",
                last_value=float(np.max(np.abs(exc.eigenvalues))),
            ) from exc
        raise ConvergenceError("spectral estimate did not converge") from exc
    except spla.ArpackError as exc:
        # fully degenerate (nilpotent) operators can defeat Arnoldi; on the
        # mean-zero subspace everything decays to ~0, so report 0
        probe = v0 / np.max(np.abs(v0))
        for _ in range(int(math.log2(N)) + 4):
            probe = mv(probe)
        if np.max(np.abs(probe)) < 1e-12:
            return 0.0
        raise ConvergenceError("spectral estimate failed") from exc


def _is_uniform_grid_of(model: TransferModel):
    return model.map is not None and model.map.domain != "torus" and np.allclose(
        model.edges, np.linspace(0.0, 1.0, model.N + 1)
    )


def spectral_gap(model: TransferModel, deresonate: bool = True) -> float:
    """theta: modulus of the subdominant eigenvalue of the model.

    Uniform-grid discretizations of integer-slope Markov maps can be
    spectrally degenerate: when the grid is exactly Markov for the map (any
    power-of-two grid for the doubling map) the finite matrix is nilpotent
    on mean-zero functions and its spectrum says nothing about the map.
    With deresonate=True the estimate is cross-checked on companion grids
    of N-1 and N+1 cells, which cannot align with the branch structure, and
    the companion value is returned when the model's own spectrum collapses.
    """
    theta = _subdominant_modulus(model)
    if not deresonate or not _is_uniform_grid_of(model):
        return theta
    try:
        up = _subdominant_modulus(ulam_matrix(model.map, model.N + 1))
    except (ConvergenceError, ResourceLimitError):
        return theta
    if abs(up - theta) <= 1e-6:
        return theta
    if theta < up:  # collapse suspected: corroborate with the other companion
        try:
            down = _subdominant_modulus(ulam_matrix(model.map, model.N - 1))
        except (ConvergenceError, ResourceLimitError):
            return theta
        if abs(up - down) <= 1e-6:
            return 0.5 * (up + down)
    return theta


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def _profile_cell_averages(p, r, delta, edges):
    """Cell averages of the collar ramp: 1 inside B(p,r), linear to 0 over
    an outer collar of width delta; exact trapezoid integration."""
    p = p % 1.0
    knots = {0.0, 1.0}
    for off in (-r - delta, -r, r, r + delta):
        knots.add((p + off) % 1.0)
    knots.add((p + 0.5) % 1.0)  # antipode: kink of the circle distance
    kn = np.array(sorted(knots))

    def prof(x):
        d = np.abs(np.asarray(x) - p)
        d = np.minimum(d, 1.0 - d)
        if delta <= 0.0:
            return (d < r).astype(np.float64)
        return np.clip((r + delta - d) / delta, 0.0, 1.0)

    vals = prof(kn)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(kn))])

    def F(t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.clip(np.searchsorted(kn, t, side="right") - 1, 0, len(kn) - 2)
        return cum[idx] + 0.5 * (vals[idx] + prof(t)) * (t - kn[idx])

    Fe = F(edges)
    return np.diff(Fe) / np.diff(edges)


def mollify_indicator(schedule: TargetSchedule, i: int, grid: TransferModel):
    """(phi_tilde_i, phi_i) on the grid: collar mollifier with delta = 1/i^3
    (L1 error delta, Lipschitz constant i^3), nested below the previous
    mollifier by pointwise minimum, then mean-removed."""
    if not 1 <= i <= schedule.n_max:
        raise ParameterError(f"index {i} outside 1..{schedule.n_max}")
    if schedule.map.domain == "torus":
        raise UnsupportedMapError("grid mollifiers are 1-D only")
    p = schedule.p
    r = schedule.r[i - 1]
    if schedule.mu[i - 1] >= 1.0:
        tilde = np.ones(grid.N)
    else:
        tilde = _profile_cell_averages(p, r, i ** -3.0, grid.edges)
        if i > 1 and schedule.mu[i - 2] < 1.0:
            prev = _profile_cell_averages(
                p, schedule.r[i - 2], (i - 1) ** -3.0, grid.edges
            )
            tilde = np.minimum(tilde, prev)
    phi = tilde - grid.integrate(tilde)
    return tilde, phi


def cylinder_observable(schedule: TargetSchedule, i: int, model: TransferModel):
    """Exact mean-removed cylinder indicator on the exact-markov grid."""
    if schedule.kind != "dyadic":
        raise ParameterError("cylinder observables need a dyadic schedule")
    if model.kind != "exact-markov":
        raise ParameterError("cylinder observables need an exact-markov model")
    D = int(schedule.depth[i - 1])
    if D > model.depth:
        raise ParameterError(
            f"cylinder depth {D} exceeds model depth {model.depth}"
        )
    mu = schedule.mu[i - 1]
    span = model.N >> D
    c = int(schedule.scaled_lo[i - 1] >> np.uint64(dynamics.SCALE_BITS - D))
    phi = np.full(model.N, -mu)
    phi[c * span : (c + 1) * span] += 1.0
    return phi


def _observable(model, schedule, k):
    if schedule.kind == "dyadic" and model.kind == "exact-markov":
        return cylinder_observable(schedule, k, model)
    return mollify_indicator(schedule, k, model)[1]


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

@dataclass
class DecompositionState:
    model: TransferModel
    schedule: TargetSchedule
    n: int
    w_sup: np.ndarray  # ||w_k||_inf, k = 1..n+1
    w_l1: np.ndarray  # ||w_k||_1,  k = 1..n+1
    psi_residual_l1: np.ndarray  # ||L psi_k||_1, k = 1..n
    psi_sq: np.ndarray  # E[psi_k^2], k = 1..n
    phi_sq: np.ndarray  # E[phi_k^2], k = 1..n
    w_phi: np.ndarray  # integral w_k phi_k dmu, k = 1..n
    w_final: np.ndarray  # w_{n+1} values
    phi: list = None  # retained arrays when keep_arrays
    w: list = None
    psi: list = None


def martingale_decompose(
    model: TransferModel,
    schedule: TargetSchedule,
    n: int,
    keep_arrays: bool = False,
) -> DecompositionState:
    """Run w_{k+1} = L(phi_k + w_k), assemble psi_k = phi_k - U w_{k+1} + w_k,
    and record norm/identity traces."""
    if not 1 <= n <= schedule.n_max:
        raise ParameterError("horizon exceeds available observables")
    N = model.N
    w = np.zeros(N)  # w_1 = 0 since phi_0 = 0
    w_sup = np.zeros(n + 1)
    w_l1 = np.zeros(n + 1)
    psi_res = np.zeros(n)
    psi_sq = np.zeros(n)
    phi_sq = np.zeros(n)
    w_phi = np.zeros(n)
    phis, ws, psis = ([], [], []) if keep_arrays else (None, None, None)
    if keep_arrays:
        ws.append(w.copy())
    for k in range(1, n + 1):
        phi = _observable(model, schedule, k)
        phi_sq[k - 1] = model.integrate(phi * phi)
        w_phi[k - 1] = model.integrate(w * phi)
        w_next = model.apply(phi + w)
        psi = phi - model.koopman(w_next) + w
        psi_sq[k - 1] = model.integrate(psi * psi)
        psi_res[k - 1] = model.norm_l1(model.apply(psi))
        if keep_arrays:
            phis.append(phi)
            ws.append(w_next.copy())
            psis.append(psi)
        w = w_next
        w_sup[k] = np.max(np.abs(w))
        w_l1[k] = model.norm_l1(w)
    return DecompositionState(
        model=model,
        schedule=schedule,
        n=n,
        w_sup=w_sup,
        w_l1=w_l1,
        psi_residual_l1=psi_res,
        psi_sq=psi_sq,
        phi_sq=phi_sq,
        w_phi=w_phi,
        w_final=w,
        phi=phis,
        w=ws,
        psi=psis,
    )


def w_sup_norm_trace(state: DecompositionState):
    """(||w_k||_inf, ||w_k||_1) for k = 1..n+1."""
    return state.w_sup, state.w_l1


# ---------------------------------------------------------------------------
# variance identities and exact variance
# ---------------------------------------------------------------------------

def _cross_lag_cap(model: TransferModel):
    """Lag beyond which L^m phi is (exactly or certifiably) negligible."""
    if model.kind == "exact-markov":
        return model.depth  # L^depth of any mean-zero observable is exactly 0
    theta = max(min(spectral_gap(model), 0.999), 1e-6)
    return max(int(math.ceil(math.log(1e-14) / math.log(theta))), 4)


def _pairwise_cross_sum(model, schedule, n, per_j=False):
    """sum_{i<j<=n} integral (L^{j-i} phi_i) phi_j dmu by forward iteration
    of each phi_i, truncated at the certified lag cap."""
    cap = _cross_lag_cap(model)
    phis = [_observable(model, schedule, k) for k in range(1, n + 1)]
    out = np.zeros(n)
    for i in range(1, n + 1):
        g = phis[i - 1]
        for j in range(i + 1, min(i + cap, n) + 1):
            g = model.apply(g)
            out[j - 1] += model.integrate(g * phis[j - 1])
    return out if per_j else float(np.sum(out))


def variance_identities(model: TransferModel, schedule: TargetSchedule, n: int):
    """Check the two exact variance identities at horizon n.

    lemma-cross:   sum_{i<j} E(phi_i o T^i phi_j o T^j) = sum_j int w_j phi_j
    lemma-telescope: E(sum phi_j o T^j)^2
                     = sum E[psi_i^2] - int w_1^2 + int w_{n+1}^2
    """
    st = martingale_decompose(model, schedule, n)
    cross = _pairwise_cross_sum(model, schedule, n)
    lhs25 = cross
    rhs25 = float(np.sum(st.w_phi))
    lhs26 = float(np.sum(st.phi_sq)) + 2.0 * cross
    rhs26 = float(np.sum(st.psi_sq)) + model.integrate(st.w_final * st.w_final)
    scale25 = max(abs(lhs25), abs(rhs25), 1e-30)
    scale26 = max(abs(lhs26), abs(rhs26), 1e-30)
    return {
        "n": n,
        "cross_lhs": lhs25,
        "cross_rhs": rhs25,
        "cross_abs_residual": abs(lhs25 - rhs25),
        "cross_rel_residual": abs(lhs25 - rhs25) / scale25,
        "telescope_lhs": lhs26,
        "telescope_rhs": rhs26,
        "telescope_abs_residual": abs(lhs26 - rhs26),
        "telescope_rel_residual": abs(lhs26 - rhs26) / scale26,
    }


def exact_variance(model: TransferModel, schedule: TargetSchedule, n: int) -> float:
    """a_n^2 = Var(sum_{j<=n} 1_{B_j} o T^j).

    Doubling metric-ball schedules route through the closed-form lag
    covariance engine (exact, no discretization).  Dyadic schedules on the
    exact model use operator pair sums (exact).  Anything else falls back to
    the Ulam approximation of the same pair sums.
    """
    if schedule.scaled_lo is not None and schedule.kind == "ball":
        return float(correlations.variance_curve(schedule, [n])[0])
    phi2 = [
        float(model.integrate(_observable(model, schedule, k) ** 2))
        for k in range(1, n + 1)
    ]
    cross = _pairwise_cross_sum(model, schedule, n)
    return float(np.sum(phi2) + 2.0 * cross)


def variance_curve(model, schedule, checkpoints):
    """a_n^2 at several checkpoints (one pass)."""
    if schedule.scaled_lo is not None and schedule.kind == "ball":
        return correlations.variance_curve(schedule, checkpoints)
    cps = np.asarray(checkpoints, dtype=np.int64)
    n = int(cps.max())
    per_j = _pairwise_cross_sum(model, schedule, n, per_j=True)
    phi2 = np.array(
        [float(model.integrate(_observable(model, schedule, k) ** 2)) for k in range(1, n + 1)]
    )
    tot = np.cumsum(phi2 + 2.0 * per_j)
    return tot[cps - 1]
