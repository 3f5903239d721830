"""Shared fixtures.

The 500-replication Monte Carlo studies are expensive (several minutes
each), so they are computed once per session and shared between the module
tests and the acceptance suite.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from partialprobit.estimator import FitOptions
from partialprobit.simulate import SimConfig, monte_carlo

# 26 departments x 800 scholars - 800 own pairs = 20,000 dyads.
N20K = dict(n_departments=26, n_scholars=800)


@pytest.fixture(scope="session")
def mc_rho0_500():
    """500 replications at N = 20,000 under rho = 0 truth, with LR tests."""
    config = SimConfig(**N20K, true_rho=0.0, seed=0)
    return monte_carlo(config, 500, FitOptions(n_starts=1, seed=0),
                       do_lr_test=True, compute_coverage=False)


@pytest.fixture(scope="session")
def mc_rho03_500():
    """500 replications at N = 20,000 under the default rho = 0.3 truth."""
    config = SimConfig(**N20K, seed=0)
    return monte_carlo(config, 500, FitOptions(n_starts=1, seed=0),
                       do_lr_test=False, compute_coverage=True)


@pytest.fixture(scope="session")
def mc_bias_500():
    """500 replications at N = 20,000 with many small departments.

    Finite-sample bias on the department-level slopes is driven by how many
    distinct department covariate draws there are, so the bias check uses
    a 101 x 200 design (101*200 - 200 = 20,000 dyads) instead of 26 x 800.
    """
    config = SimConfig(n_departments=101, n_scholars=200, seed=0)
    return monte_carlo(config, 500, FitOptions(n_starts=1, seed=0),
                       do_lr_test=False, compute_coverage=False)
