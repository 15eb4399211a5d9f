"""Integrated and interior gradients with rival attribution methods and evaluation protocols."""

__version__ = "0.1.0"
