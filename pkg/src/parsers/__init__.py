"""Parsers package for experiment configuration files and overrides."""
