"""Desk-scale geometry of Fuchsian groups: orbits, boundaries, excursions, flows and Cantor trees."""
__version__ = "0.1.0"
