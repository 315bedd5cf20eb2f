"""Spectral-Galerkin simulator for a stochastic chemotaxis-Stokes system
with porous-medium diffusion on the periodic 2-D torus, plus the
verification harness for its energy estimates and solution identities."""

__version__ = "0.1.0"
