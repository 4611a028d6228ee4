"""Groupoid quantization laboratory: finite groupoid C*-algebras, Weyl quantization on
grid groupoids, Hilbert bimodules and the classical limit of arrows."""

__version__ = "0.1.0"
