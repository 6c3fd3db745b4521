"""Eigensolvers, spectral projections and Green-function block norms."""
