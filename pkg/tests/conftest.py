"""Shared fixtures.  The expensive Monte Carlo ensemble and schedules are
session-scoped so the acceptance tests can share one run."""

import numpy as np
import pytest

from shrinktarget import GENERIC_CENTER, build_schedule, doubling_map, run_ensemble

ENSEMBLE_SEED = 20260824
ENSEMBLE_CHECKPOINTS = (1000, 30000, 1000000)


@pytest.fixture(scope="session")
def dbl():
    return doubling_map()


@pytest.fixture(scope="session")
def sched_million(dbl):
    """Generic-center ball schedule out to n = 10^6 (mu_i = min(1, 1/i))."""
    return build_schedule(dbl, p=GENERIC_CENTER, gamma=1.0, C=1.0, n_max=10 ** 6)


@pytest.fixture(scope="session")
def mc_million(dbl, sched_million):
    """The big ensemble: M = 10^4 trajectories to n = 10^6."""
    return run_ensemble(
        dbl, sched_million, 10 ** 6, 10 ** 4, ENSEMBLE_SEED,
        np.array(ENSEMBLE_CHECKPOINTS),
    )
