"""Compatibility of binary sequences via weighted words, dependent oriented
percolation and multiscale grouping."""

__version__ = "0.1.0"
