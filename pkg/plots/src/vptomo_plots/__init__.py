"""Figures for vptomo CSV artifacts.

Reads the sinogram, grid, sweep, and trajectory files the pipeline CLI
writes and renders deterministic PNGs; knows nothing about the producer
beyond those formats.
"""

from .figures import KINDS, FigureSpec, fitted_slope, render
from .readers import ParseError

__version__ = "0.1.0"

__all__ = ["KINDS", "FigureSpec", "ParseError", "fitted_slope", "render"]
