"""Variational Monte Carlo steady states of open spin-1/2 chains.

The package optimizes a Liouville-space neural ansatz (an RBM over 4-state
sites) against the vectorized Lindblad generator of two dissipative
transverse-field Ising chains, with stochastic reconfiguration updates and a
dense exact-diagonalization oracle for verification at small sizes.
"""

from .models import ModelSpec, liouvillian_row, build_dense_liouvillian
from .ansatz import LdmParameters, init_params, log_rho, log_derivatives
from .errors import ConfigError, DomainError, NumericalError, SizeLimitError

__version__ = "0.1.0"
