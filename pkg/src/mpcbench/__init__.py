"""Benchmarking workbench for building-energy controllers."""

__version__ = "0.1.0"
