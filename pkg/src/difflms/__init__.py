"""Diffusion-LMS networks with random node sampling: simulation and theory.

The package simulates adapt-then-combine diffusion LMS over connected
networks where each node adapts only when a per-iteration Bernoulli coin
allows it, and evaluates the matching mean-square models: the exact
transient/steady-state recursion, the cooperative approximation, closed
forms for non-cooperative and complete-graph networks, spectral-radius
stability prediction, and the multiplication-count model.
"""

__version__ = "0.1.0"

from . import cost, presets, scenario, simulation, theory, topology, weights
from .errors import ConfigError, NotStableError, NumericalFailureError, TopologyFormatError

__all__ = [
    "__version__",
    "ConfigError",
    "NotStableError",
    "NumericalFailureError",
    "TopologyFormatError",
    "cost",
    "presets",
    "scenario",
    "simulation",
    "theory",
    "topology",
    "weights",
]
