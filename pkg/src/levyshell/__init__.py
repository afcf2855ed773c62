"""Shell-model turbulence driven by pure-jump Levy noise.

Subpackages:

- ``levy``: parametric jump measures, samplers, structural checks
- ``shell``: the diagonal dissipative operator, GOY/SABRA couplings, cutoff
- ``integrator``: event-driven time stepping, stochastic convolution, splitting
- ``bel``: Jacobian flows and jump-based Monte Carlo gradient estimation
- ``ergolab``: ensemble diagnostics for decay, accessibility, and mixing
- ``cli``: configuration, orchestration, and reproducible artifact output
"""

from . import bel, cli, ergolab, integrator, levy, shell  # noqa: F401

__version__ = "0.1.0"
