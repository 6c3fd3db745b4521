"""Time evolution, dynamical moments and eigenfunction decay fits."""
