"""Spectral numerics for the degenerate elliptic family L_gamma on the unit disk.

L_gamma = -x d^2/drho^2 - (1/rho - (3 + 2 gamma) rho) d/drho - rho^-2 d^2/domega^2 + (gamma + 1)^2,
x = 1 - rho^2, acting on L^2(D, x^gamma dV).
"""
__version__ = "0.1.0"

from .basis import GammaParam, Regime, RegimeError, RadialProfile, ZernikeIndex, PhiGamma  # noqa: E402,F401
from .operator import ConormalElement, apply_L, h1_form, inner_product  # noqa: E402,F401
from .spaces import BoundaryFunction, SpectralVector, trace_dirichlet, trace_neumann  # noqa: E402,F401
