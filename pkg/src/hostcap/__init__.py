"""Hosting capacity regions of radial distribution grids and storage sizing against them."""

__version__ = "0.1.0"
