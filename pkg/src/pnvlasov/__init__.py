"""Kinetic scalar-gravity toolkit.

Solvers for a relativistic scalar-gravity kinetic system and its expansion
hierarchy: the Newtonian limit, the linearized first correction, the
assembled 1.5PN (Darwin) pair, the full wave-coupled system with retarded
field evaluation, and a single-density Darwin variant, plus a harness that
measures the convergence orders of the approximations across a ladder of
light-speed values.
"""

__version__ = "0.1.0"
