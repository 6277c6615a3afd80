"""Batch figure rendering for kcip-lab CSV reports (schema 1)."""

__version__ = "0.1.0"

from .csvio import SchemaError, read_report
from .figures import FigureSpec, PlotError, render
