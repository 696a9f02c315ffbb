"""chtumor: a spectral laboratory for a two-phase tumor growth model.

Simulates the coupled Cahn-Hilliard / reaction-diffusion system with
chemotaxis and active transport on rectangular domains, audits its
structural laws (energy dissipation, mass conservation, Lyapunov
monotonicity), solves the mass-constrained stationary problem, and verifies
the decay and smoothing behavior of the linearized flow.
"""

from .kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
