"""Shoebox room impulse responses with diffuse-reflection rendering."""

__version__ = "0.1.0"
