"""Shared model builders for the test suite."""

import numpy as np
import pytest

from momdp import GoalRegion, GridSpec, MomdpModel, UncertainRegion


def random_model(seed, num_s, num_e, num_a, num_z, horizon, n_target=1):
    """Dense random model with Dirichlet rows; always passes validation."""
    rng = np.random.default_rng(seed)
    t_s = rng.dirichlet(np.ones(num_s), size=(num_s, num_e, num_a))
    t_e = rng.dirichlet(np.ones(num_e), size=(num_s, num_e, num_a, num_s))
    obs = rng.dirichlet(np.ones(num_z), size=(num_s, num_e, num_a))
    target = frozenset(int(x) for x in rng.choice(num_s, size=n_target, replace=False))
    return MomdpModel(num_s=num_s, num_e=num_e, num_a=num_a, num_z=num_z,
                      t_s=t_s, t_e=t_e, obs=obs, target=target, horizon=horizon)


def random_beliefs(seed, count, num_e):
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(num_e), size=count)


# Dimension schedule (S, E, A, Z, N) for the small-instance acceptance runs.
# Each bound of the acceptance criteria (S=4, E=3, A=3, Z=2, N=4) is hit by
# at least one entry, and every entry keeps both the exact cross-sum and the
# policy enumeration within their caps.
SMALL_INSTANCE_DIMS = [
    (2, 2, 2, 1, 2), (2, 2, 2, 1, 3), (2, 2, 2, 1, 4), (2, 3, 2, 1, 4),
    (2, 2, 2, 2, 2), (2, 3, 2, 2, 2), (2, 2, 2, 2, 3), (2, 3, 3, 2, 2),
    (3, 2, 2, 1, 3), (3, 3, 2, 1, 3), (3, 2, 3, 1, 2), (3, 3, 3, 1, 2),
    (4, 2, 2, 2, 2), (4, 3, 3, 2, 2), (4, 2, 3, 2, 2), (4, 3, 2, 2, 1),
    (3, 2, 2, 2, 2), (3, 3, 3, 2, 2), (2, 2, 3, 1, 3), (4, 3, 3, 1, 2),
]


def small_instances():
    for seed, dims in enumerate(SMALL_INSTANCE_DIMS):
        yield random_model(seed, *dims)


def gate_spec(horizon=4, prior=0.9):
    """1x3 corridor: start, one uncertain gate, goal."""
    return GridSpec(
        width=3, height=1, obstacles=frozenset(),
        goals=(GoalRegion(((0, 2),), 1.0),),
        regions=(UncertainRegion(((0, 1),), prior),),
        obs_model="adjacency", horizon=horizon, start_cell=(0, 0),
    )


def corridor_spec(horizon=2):
    """1x2 corridor with no uncertainty: one step east reaches the goal."""
    return GridSpec(
        width=2, height=1, obstacles=frozenset(),
        goals=(GoalRegion(((0, 1),), 1.0),),
        regions=(),
        obs_model="adjacency", horizon=horizon, start_cell=(0, 0),
    )


@pytest.fixture(scope="session")
def toy_model():
    """Small random model reused by cross-module consistency tests."""
    return random_model(42, 2, 2, 2, 2, 2)
