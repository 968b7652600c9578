"""
Continuous-time plants shipped with the lab.
"""

import numpy as np


def inverted_pendulum(length: float = 1.0, mass: float = 0.1, gravity: float = 9.81):
    """
    Linearised inverted pendulum about the upright equilibrium.

    State [theta, theta_dot], input torque.

    Returns:
        (Ac, Bc) continuous-time matrices
    """
    Ac = np.array([[0.0, 1.0],
                   [3.0 * gravity / (2.0 * length), 0.0]])
    Bc = np.array([[0.0],
                   [3.0 / (mass * length ** 2)]])
    return Ac, Bc


def double_integrator():
    """Unit double integrator, state [position, velocity]."""
    Ac = np.array([[0.0, 1.0],
                   [0.0, 0.0]])
    Bc = np.array([[0.0],
                   [1.0]])
    return Ac, Bc


CONTINUOUS_PLANTS = {
    'inverted_pendulum': inverted_pendulum,
    'double_integrator': double_integrator,
}
