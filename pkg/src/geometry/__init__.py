"""Lattice geometry of n-particle cubes: separability, interactivity and oracle suites."""
