"""Multi-scale analysis: scales, cube classification and Monte Carlo estimators."""
