"""Numerical crossing-sliding bifurcation analysis for planar Z2-symmetric Filippov systems."""

from .model import FilippovModel, build_model, eval_field, load_scenario

__version__ = "0.1.0"

__all__ = ["FilippovModel", "build_model", "eval_field", "load_scenario", "__version__"]
