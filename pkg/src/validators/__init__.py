"""Validators package for experiment consistency checks."""
