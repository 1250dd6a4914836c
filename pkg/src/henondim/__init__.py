"""Hausdorff dimension estimates for Julia sets of generalized Hénon maps."""

from .algebra import HenonFactor, HenonMap, MapError, PointC2, henon, inverse_map, make_map

__version__ = "0.1.0"

__all__ = ["HenonFactor", "HenonMap", "MapError", "PointC2", "henon", "inverse_map", "make_map", "__version__"]
