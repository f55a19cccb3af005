"""Increasing couplings, irreducibility checks, simulation and hydrodynamics
for conservative lattice particle systems of misanthrope type."""

__version__ = "0.1.0"
