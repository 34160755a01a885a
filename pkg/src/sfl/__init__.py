"""Numerical laboratory for rotating sub- and superluminal polarization currents."""

__version__ = "0.1.0"

from .model import (CompactElement, DiscreteSource, InvariantError, MachineConfig, Shape,
                    SourceConfig, SpacetimePoint, machine_to_source)
from .solver import FieldSample, QuadratureSpec

__all__ = ["CompactElement", "DiscreteSource", "FieldSample", "InvariantError", "MachineConfig",
           "QuadratureSpec", "Shape", "SourceConfig", "SpacetimePoint", "machine_to_source",
           "__version__"]
