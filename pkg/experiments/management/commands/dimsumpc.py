"""
Run a Dim-SuMPC scenario (diminishing horizons) in closed loop.
Usage: python manage.py dimsumpc --preset pendulum_dimsumpc [--out DIR] [--repeat N]
"""

from .simulate import Command as SimulateCommand


class Command(SimulateCommand):
    help = 'Simulate a Dim-SuMPC scenario with its horizon schedule'
    modes = ('dimsumpc',)
