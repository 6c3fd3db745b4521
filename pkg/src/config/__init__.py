"""Configuration package: experiment defaults, schema and resolution."""
