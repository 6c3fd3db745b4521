"""
Multi-particle MSA laboratory

Numerical checks of the multi-scale analysis for interacting lattice
particles: cube geometry, Monte Carlo bounds, weak-interaction stability and
dynamical localization. Modules import each other with src/ on sys.path;
the entry point is app/mpmsa_start.py.
"""

__version__ = "1.0.0"
__author__ = "Lattice Spectral Lab"
