"""
Pytest configuration and shared fixtures: the discretized inverted pendulum
and a scalar plant small enough for certified runs.
"""
import json

import numpy as np
import pytest

from condensing.services import build_condensed, spectral_data
from plants.presets import inverted_pendulum
from plants.services import LtiModel, discretize, solve_dare
from solvers.services import BoxSet

PENDULUM_X0 = [-np.pi / 4, np.pi / 5]


@pytest.fixture(scope="session")
def pendulum_model():
    """Inverted pendulum (L=1, m=0.1, g=9.81) under zero-order hold at Ts=0.1."""
    Ac, Bc = inverted_pendulum()
    return discretize(Ac, Bc, 0.1, 'zoh')


@pytest.fixture(scope="session")
def pendulum_cost(pendulum_model):
    return solve_dare(pendulum_model, np.eye(2), [[1.0]])


@pytest.fixture(scope="session")
def unit_box():
    return BoxSet.symmetric(1.0)


@pytest.fixture(scope="session")
def pendulum_qp(pendulum_model, pendulum_cost):
    """Condensed QP with N=3, small enough for the enumeration oracle."""
    qp = build_condensed(pendulum_model, pendulum_cost, 3)
    return qp, spectral_data(qp)


@pytest.fixture(scope="session")
def scalar_model():
    return LtiModel(A=[[0.5]], B=[[1.0]])


@pytest.fixture(scope="session")
def scalar_cost(scalar_model):
    return solve_dare(scalar_model, [[1.0]], [[1.0]])


@pytest.fixture(scope="session")
def scalar_qp(scalar_model, scalar_cost):
    qp = build_condensed(scalar_model, scalar_cost, 3)
    return qp, spectral_data(qp)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def write_config(tmp_path):
    """Write a scenario document to a temporary JSON file and return its path."""
    def _write(document, name='scenario.json'):
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return str(path)
    return _write


@pytest.fixture
def scalar_document():
    """A valid TD-MPC scenario on the scalar plant with an automatic certified budget."""
    return {
        'name': 'scalar_test',
        'mode': 'tdmpc',
        'plant': {'kind': 'discrete', 'A': [[0.5]], 'B': [[1.0]]},
        'cost': {'Q': [[1.0]], 'R': [[1.0]]},
        'box': {'lower': [-1.0], 'upper': [1.0]},
        'x0': [1.0],
        'T': 20,
        'horizon': 3,
        'budget': 'auto',
        'kappa_mode': 'gram',
    }
