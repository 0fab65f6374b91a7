"""Information design for linear-quadratic-Gaussian environments.

Solves the designer's problem as a semidefinite program, certifies optima
through dual multipliers and complementary slackness, analyzes the resulting
Gaussian information structures, and cross-validates against analytic
solutions for symmetric networks, complete networks, and public signals.
"""

from . import (closedform, designsdp, envmodel, matcore, sdpcore, structure,
               symmetry)

__all__ = [
    "matcore",
    "envmodel",
    "sdpcore",
    "designsdp",
    "structure",
    "symmetry",
    "closedform",
]

__version__ = "0.1.0"
