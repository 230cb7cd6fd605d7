"""Target schedules: measures, radii, nesting, dyadic commitment, membership."""

import math

import numpy as np
import pytest

from shrinktarget import dynamics, targets
from shrinktarget.errors import ParameterError, UnsupportedMapError


@pytest.fixture(scope="module")
def dbl():
    return dynamics.doubling_map()


def test_prefix_sums_harmonic(dbl):
    sch = targets.build_schedule(dbl, p=1 / 3, gamma=1.0, C=1.0, n_max=4)
    # E_4 = 1 + 1/2 + 1/3 + 1/4 = 25/12
    assert sch.E[3] == pytest.approx(25 / 12, abs=1e-12)
    assert sch.mu[0] == 1.0  # min(1, C/i) saturates at i = 1


def test_radii_closed_form(dbl):
    sch = targets.build_schedule(dbl, p=1 / 3, gamma=1.0, C=1.0, n_max=10)
    # Lebesgue: mu = 2r, so r_3 = 1/6 (up to the dyadic grid commitment)
    assert sch.r[2] == pytest.approx(1 / 6, abs=2 ** -59)


def test_mu_matches_scaled_width(dbl):
    """The committed dyadic arcs ARE the targets: mu is exactly width/2^60."""
    sch = targets.build_schedule(dbl, p=math.pi - 3, gamma=1.0, C=1.0, n_max=1000)
    assert np.all(sch.mu == sch.scaled_width / 2.0 ** 60)


def test_nesting(dbl):
    sch = targets.build_schedule(dbl, p=0.7, gamma=0.5, C=2.0, n_max=5000)
    assert np.all(np.diff(sch.r) <= 0)
    assert np.all(np.diff(sch.mu) <= 0)
    # set nesting on the scaled grid: B_{i+1} subset B_i
    lo, w = sch.scaled_lo.astype(object), sch.scaled_width.astype(object)
    S = 1 << 60
    for i in (10, 100, 1000, 4998):
        off = (lo[i + 1] - lo[i]) % S
        assert off + w[i + 1] <= w[i]


def test_gamma_C_validation(dbl):
    with pytest.raises(ParameterError):
        targets.build_schedule(dbl, p=0.5, gamma=1.5, C=1.0, n_max=10)
    with pytest.raises(ParameterError):
        targets.build_schedule(dbl, p=0.5, gamma=1.0, C=-1.0, n_max=10)


def test_nonuniform_measure_radii():
    m = dynamics.markov_linear_map()
    sch = targets.build_schedule(m, p=0.6, gamma=1.0, C=1.0, n_max=200)
    # bisection-inverted radii reproduce the requested measures
    for i in (5, 50, 199):
        got = dynamics.measure_of_ball(m, 0.6, sch.r[i])
        assert got == pytest.approx(sch.mu[i], rel=1e-12)


def test_gauss_schedule_measures():
    m = dynamics.gauss_map()
    sch = targets.build_schedule(m, p=0.4, gamma=1.0, C=1.0, n_max=100)
    for i in (3, 30, 99):
        got = dynamics.measure_of_ball(m, 0.4, sch.r[i])
        assert got == pytest.approx(sch.mu[i], rel=1e-12)


def test_dyadic_schedule(dbl):
    sch = targets.dyadic_schedule(1 / 3, n_max=64)
    # depth ceil(log2 i): mu_i = 2^-depth, exact powers of two
    assert sch.depth[0] == 0 and sch.mu[0] == 1.0
    assert sch.depth[2] == 2 and sch.mu[2] == 0.25
    assert sch.depth[63] == 6 and sch.mu[63] == 2.0 ** -6
    assert sch.depth[1] == 1
    # cylinder containing p at each depth
    for i in (3, 16, 63):
        d = int(sch.depth[i])
        cell = math.floor((1 / 3) * 2 ** d)
        assert int(sch.scaled_lo[i]) == cell << (60 - d)
    with pytest.raises(UnsupportedMapError):
        targets.dyadic_schedule(0.5, 10, dynamics.tent_map())


def test_membership_half_open(dbl):
    sch = targets.dyadic_schedule(0.0, n_max=8)
    assert targets.membership(sch, 8, 0.0)
    assert targets.membership(sch, 8, 0.1249999)
    assert not targets.membership(sch, 8, 0.125)  # half-open right end
    with pytest.raises(IndexError):
        targets.membership(sch, 9, 0.0)


def test_membership_metric(dbl):
    sch = targets.build_schedule(dbl, p=0.98, gamma=1.0, C=1.0, n_max=100)
    assert targets.membership(sch, 100, 0.98)
    assert targets.membership(sch, 100, 0.9849)  # inside r_100 = 1/200
    assert not targets.membership(sch, 100, 0.99)  # past the right edge
    assert not targets.membership(sch, 100, 0.5)
    # ball B_2 has r = 1/4 and wraps through 1
    assert targets.membership(sch, 2, 0.1)
    assert targets.membership(sch, 2, 0.8)
    assert not targets.membership(sch, 2, 0.5)


def test_torus_schedule():
    m = dynamics.toral_map(2, 3)
    sch = targets.build_schedule(m, p=(0.3, 0.7), gamma=1.0, C=1.0, n_max=50)
    assert sch.scaled_lo is None  # no dyadic commitment on the torus
    for i in (2, 49):
        got = dynamics.measure_of_ball(m, (0.3, 0.7), sch.r[i])
        assert got == pytest.approx(sch.mu[i], rel=1e-10)
    assert targets.membership(sch, 50, (0.3, 0.7))
    assert not targets.membership(sch, 50, (0.8, 0.2))
