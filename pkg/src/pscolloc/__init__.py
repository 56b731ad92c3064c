"""Pseudospectral trajectory optimization with Legendre-Gauss collocation.

Implements the classical first-order Legendre-Gauss transcription and a
second-order variant that models only the configuration polynomials, keeps
velocities as their exact derivatives, and enforces the second-order
dynamics at the collocation points.  Includes benchmark problems, a
reference NLP solver, collocation-based initial value solving, and
dynamic-error analysis.
"""

__version__ = "0.1.0"
