"""Volumes and separability probabilities of bipartite state spaces conditioned on a reduced state.

Modules
-------
statespace  Bloch parametrization, partial operations, positivity, metric weights
xstate      closed forms for two-qubit X-states
samplers    Hilbert-Schmidt, fiber and rejection samplers
estimators  Monte-Carlo estimators, envelope fits and the volume conjecture
cli         ``condvol`` command-line driver
"""

__version__ = "0.1.0"
