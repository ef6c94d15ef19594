"""Certified approximation, separation and description length of IFS Cantor sets and hyperbolic attractors."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import DistortionLabError
from .ifs_core import IfsMap, IfsPair, cantor_approx, endpoint_set, ternary_pair, validate_ifs
from .metrics import AtomicMeasure, hausdorff, kantorovich_1d, kantorovich_lp

__all__ = [
    "AtomicMeasure",
    "DistortionLabError",
    "IfsMap",
    "IfsPair",
    "cantor_approx",
    "endpoint_set",
    "hausdorff",
    "kantorovich_1d",
    "kantorovich_lp",
    "ternary_pair",
    "validate_ifs",
]
