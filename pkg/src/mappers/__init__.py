"""Mappers package turning results into records and plot tables."""
