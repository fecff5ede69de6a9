"""Numerical laboratory for oscillatory scalar conservation laws.

Modules: fluxes (periodic flux catalog), grids (product lattices and exact
kinetic profiles), fv (finite-volume solvers), cells (stationary microscopic
states and prepared data), projections (constraint spaces, admissible-profile
cone, alternating projections), bgk (relaxation model and hydrodynamic limit),
limits (homogenized references and structural checks), diagnostics
(convergence metrics), fieldio (serialization), cli (experiment driver).
"""

__version__ = "0.1.0"
