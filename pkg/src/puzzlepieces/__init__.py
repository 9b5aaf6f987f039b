"""Puzzle pieces, strongly regular words and their numerics for quadratic and
Henon-like maps."""

__version__ = "0.1.0"
