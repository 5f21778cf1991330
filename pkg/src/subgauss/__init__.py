"""Subgaussian operators on convex sets: reconstruction, isometry and neighborliness experiments."""

from .ensembles import GAUSSIAN, RADEMACHER, UNIFORM, Ensemble, Kind, RngState, sample_matrix

__all__ = ["GAUSSIAN", "RADEMACHER", "UNIFORM", "Ensemble", "Kind", "RngState", "sample_matrix"]
__version__ = "0.1.0"
