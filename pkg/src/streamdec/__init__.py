"""Monotone decomposition, level-set tracing and transport checks for planar stream functions."""

from .field import ScalarField, VectorField, load_field, save_field
from .region import RegionMask

__all__ = ["ScalarField", "VectorField", "RegionMask", "load_field", "save_field"]
__version__ = "0.1.0"
