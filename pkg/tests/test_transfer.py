"""Transfer operator models: stochasticity, adjointness, exact identities,
spectral estimation, martingale decomposition."""

import numpy as np
import pytest

from shrinktarget import dynamics, targets, transfer
from shrinktarget.errors import ResourceLimitError, UnsupportedMapError


@pytest.fixture(scope="module")
def dbl():
    return dynamics.doubling_map()


@pytest.fixture(scope="module")
def model10(dbl):
    return transfer.markov_exact_model(dbl, 10)


def test_ulam_row_stochastic_and_measure_preserving():
    for m in (dynamics.doubling_map(), dynamics.tent_map(),
              dynamics.markov_linear_map(), dynamics.gauss_map()):
        model = transfer.ulam_matrix(m, 64)
        ones = np.ones(64)
        assert np.allclose(model.apply(ones), ones, atol=1e-12), m.name
        rng_ = np.random.default_rng(0)
        f = rng_.standard_normal(64)
        assert model.integrate(model.apply(f)) == pytest.approx(
            model.integrate(f), abs=1e-12
        ), m.name


def test_tent_ulam_hand_matrix():
    """N = 4 tent map: targets [0,1/2) pull back to the outer source cells,
    targets [1/2,1) to the inner ones, weight 1/2 each."""
    m = transfer.ulam_matrix(dynamics.tent_map(), 4).matrix
    want = 0.5 * np.array([
        [1, 0, 0, 1],
        [1, 0, 0, 1],
        [0, 1, 1, 0],
        [0, 1, 1, 0],
    ], dtype=float)
    assert np.allclose(m, want, atol=1e-14)


def test_markov_exact_depth1_matrix():
    m = dynamics.markov_linear_map()
    model = transfer.markov_exact_model(m, 1)
    # P on cell indicators: rows from branch mass splitting, hand-computed
    want = np.array([[2 / 3, 1 / 3], [1.0, 0.0]])
    assert np.allclose(model.matrix, want, atol=1e-14)
    assert np.allclose(model.weights, [3 / 4, 1 / 4], atol=1e-14)


def test_koopman_adjointness(model10):
    rng_ = np.random.default_rng(1)
    f = rng_.standard_normal(1024)
    g = rng_.standard_normal(1024)
    lhs = model10.integrate(model10.apply(f) * g)
    rhs = model10.integrate(f * model10.koopman(g))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_martingale_residual_exactly_zero(dbl, model10):
    sch = targets.build_schedule(dbl, p=1 / 3, gamma=1.0, C=1.0, n_max=200)
    st = transfer.martingale_decompose(model10, sch, 200)
    assert float(np.max(st.psi_residual_l1)) <= 1e-10


def test_variance_identities_exact(dbl, model10):
    sch = targets.build_schedule(dbl, p=1 / 3, gamma=1.0, C=1.0, n_max=100)
    for n in (1, 10, 100):
        ids = transfer.variance_identities(model10, sch, n)
        assert ids["cross_rel_residual"] <= 1e-10, n
        assert ids["telescope_rel_residual"] <= 1e-10, n


def test_exact_variance_routes_agree(dbl, model10):
    sch = targets.build_schedule(dbl, p=1 / 3, gamma=1.0, C=1.0, n_max=64)
    a2_engine = transfer.exact_variance(model10, sch, 64)
    # operator pair sums on an Ulam grid of the same map converge to it
    from shrinktarget import correlations

    a2_closed = correlations.variance_curve(sch, [64])[0]
    assert a2_engine == pytest.approx(a2_closed, abs=1e-10)


def test_spectral_gap_doubling_grids(dbl):
    for N in (16, 100, 256):
        model = transfer.ulam_matrix(dbl, N)
        theta = transfer.spectral_gap(model)
        assert theta == pytest.approx(0.5, abs=1e-6), N


def test_spectral_gap_rank_one_stays_zero():
    """A genuinely memoryless model must not be 'rescued' to a fake gap."""
    m = dynamics.markov_linear_map(
        branches=[(0.0, 0.5, 2.0, 0.0), (0.5, 1.0, 2.0, -1.0)], name="dbl-markov"
    )
    model = transfer.markov_exact_model(dynamics.doubling_map(), 1)
    theta = transfer.spectral_gap(model, deresonate=False)
    assert theta <= 1e-12


def test_mollified_indicator_properties(dbl, model10):
    sch = targets.build_schedule(dbl, p=1 / 3, gamma=1.0, C=1.0, n_max=50)
    tilde, phi = transfer.mollify_indicator(sch, 20, model10)
    # phi is mean-zero; tilde stays within [0, 1] and integrates near mu_20
    assert model10.integrate(phi) == pytest.approx(0.0, abs=1e-14)
    assert tilde.min() >= -1e-12 and tilde.max() <= 1.0 + 1e-12
    assert model10.integrate(tilde) == pytest.approx(sch.mu[19], rel=1e-2)


def test_cylinder_observable_mean_zero(dbl, model10):
    sch = targets.dyadic_schedule(1 / 3, n_max=64)
    phi = transfer.cylinder_observable(sch, 40, model10)
    assert model10.integrate(phi) == pytest.approx(0.0, abs=1e-15)
    # takes exactly the two values -mu and 1-mu
    vals = np.unique(np.round(phi, 12))
    assert vals.size == 2


def test_resource_and_support_errors(dbl):
    with pytest.raises(UnsupportedMapError):
        transfer.markov_exact_model(dynamics.gauss_map(), 4)
    big = transfer.markov_exact_model(dbl, 20)
    with pytest.raises(ResourceLimitError):
        _ = big.matrix  # 2^20 x 2^20 dense is refused


def test_dump_matrix_deterministic(tmp_path, dbl):
    model = transfer.ulam_matrix(dbl, 16)
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    transfer.dump_matrix(model, p1)
    transfer.dump_matrix(model, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().splitlines()[0].startswith("16 ")
