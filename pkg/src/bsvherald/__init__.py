"""Quadrature-heralded collective spin dynamics driven by squeezed light."""

__version__ = "0.1.0"
