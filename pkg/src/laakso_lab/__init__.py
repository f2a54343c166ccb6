"""Finite-level approximations of Laakso spaces: quantum graphs, their
Laplacians, the associated diffusion, and metric-measure diagnostics."""
from __future__ import annotations

from .construction import (ContractionParams, j_sequence, params_from_dimension, params_from_ratio,
                           wormhole_locations)
from .errors import (ConstructionError, DomainError, GridError, LaaksoError, NumericError, RangeError,
                     ResolutionError, UsageError)
from .graph import QuantumGraph, build_graph, build_projection

__version__ = "0.1.0"

__all__ = [
    "ContractionParams", "j_sequence", "params_from_dimension", "params_from_ratio", "wormhole_locations",
    "QuantumGraph", "build_graph", "build_projection",
    "LaaksoError", "DomainError", "RangeError", "ConstructionError", "GridError", "ResolutionError",
    "NumericError", "UsageError",
]
