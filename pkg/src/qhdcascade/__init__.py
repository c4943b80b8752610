"""Plane-wave NLS cascade laboratory: fields, lattice sets, normal form, toy model, hydrodynamics."""
__version__ = "0.1.0"
